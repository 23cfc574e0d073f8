//! Acceptance-rejection sampling of Gaussian identifiable tensors in perfect
//! tensor spaces.
//!
//! Sample `i` of a campaign draws everything (the Gaussian target, the start
//! system and `γ`) from its own ChaCha8 stream `i` under the master seed, so
//! an outcome depends only on `(master_seed, i)` and never on scheduling.
//! Each sample gets exactly one start system; a failed path is recorded as
//! `Failed` and not retried.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::condition::{condition_report, kappa, kappa_angular};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::homotopy::{self, TrackStatus, TrackerConfig};
use crate::numfmt::fmt_f64;
use crate::tensor::{random_cpd, random_gaussian_tensor, DenseTensor, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Real,
    Complex,
    Failed,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Real => "real",
            SampleKind::Complex => "complex",
            SampleKind::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub seed_index: u64,
    pub kind: SampleKind,
    /// Regular condition number; present iff `kind == Real`.
    #[serde(with = "crate::numfmt::inf_f64_opt")]
    pub kappa: Option<f64>,
    #[serde(with = "crate::numfmt::inf_f64_opt")]
    pub kappa_angular: Option<f64>,
    pub tensor_norm: f64,
    pub steps: usize,
    /// Tracker status; `Converged` for real and complex outcomes.
    pub status: TrackStatus,
}

/// Random stream for sample `seed_index`.
pub fn substream(master_seed: u64, seed_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(seed_index);
    rng
}

/// The Gaussian tensor examined by sample `seed_index`.
pub fn draw_target(shape: &Shape, master_seed: u64, seed_index: u64) -> DenseTensor {
    random_gaussian_tensor(shape, &mut substream(master_seed, seed_index))
}

fn check_perfect(shape: &Shape, r: usize) -> Result<()> {
    if !shape.is_perfect(r) {
        return Err(Error::NotPerfect {
            r_sigma: r * shape.sigma(),
            pi: shape.pi(),
        });
    }
    Ok(())
}

/// Draws, tracks and classifies one Gaussian tensor.
pub fn sample_one(
    shape: &Shape,
    r: usize,
    seed_index: u64,
    master_seed: u64,
    tracker: &TrackerConfig,
) -> Result<SampleOutcome> {
    check_perfect(shape, r)?;
    let mut rng = substream(master_seed, seed_index);
    let target = random_gaussian_tensor(shape, &mut rng);
    let (start_t, start_x) = homotopy::build_start(shape, r, &mut rng)?;
    let res = homotopy::track(&start_t, &start_x, &target, tracker, &mut rng);

    let mut out = SampleOutcome {
        seed_index,
        kind: SampleKind::Failed,
        kappa: None,
        kappa_angular: None,
        tensor_norm: target.frobenius_norm(),
        steps: res.steps_taken,
        status: res.status,
    };
    let Some(x) = res.solution else {
        return Ok(out);
    };
    if !homotopy::classify_real(&x, tracker.realness_tol) {
        out.kind = SampleKind::Complex;
        return Ok(out);
    }
    if let Ok(cpd) = homotopy::to_cpd(&x) {
        let rep = condition_report(&cpd);
        out.kind = SampleKind::Real;
        out.kappa = Some(rep.kappa);
        out.kappa_angular = Some(rep.kappa_angular);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub shape: Shape,
    pub r: usize,
    pub target_real_count: usize,
    pub master_seed: u64,
    pub tracker: TrackerConfig,
    pub workers: usize,
    /// Give up after this many samples even if the target was not reached.
    pub max_samples: Option<u64>,
}

impl CampaignConfig {
    pub fn new(shape: Shape, r: usize, target_real_count: usize, master_seed: u64) -> Self {
        CampaignConfig {
            shape,
            r,
            target_real_count,
            master_seed,
            tracker: TrackerConfig::default(),
            workers: 1,
            max_samples: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_perfect(&self.shape, self.r)?;
        if self.target_real_count == 0 {
            return Err(Error::InvalidArgument("target real count must be at least 1".into()));
        }
        self.tracker.validate()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub real: usize,
    pub complex: usize,
    pub failed: usize,
}

impl Counts {
    pub fn from_outcomes(outcomes: &[SampleOutcome]) -> Self {
        let mut c = Counts::default();
        for o in outcomes {
            match o.kind {
                SampleKind::Real => c.real += 1,
                SampleKind::Complex => c.complex += 1,
                SampleKind::Failed => c.failed += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.real + self.complex + self.failed
    }

    /// `real / (real + complex)`, failures excluded.
    pub fn real_fraction(&self) -> f64 {
        let ok = self.real + self.complex;
        if ok == 0 {
            0.0
        } else {
            self.real as f64 / ok as f64
        }
    }

    pub fn failure_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.failed as f64 / self.total() as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct CampaignResult {
    pub shape: Shape,
    pub r: usize,
    pub master_seed: u64,
    /// Every outcome in seed-index order, up to the stopping index.
    pub outcomes: Vec<SampleOutcome>,
    pub counts: Counts,
    pub real_fraction: f64,
    pub wall_time: f64,
    /// False when `max_samples` stopped the campaign early.
    pub reached_target: bool,
}

/// Issues seed indices `0, 1, 2, ...` until `target_real_count` real outcomes
/// have been seen, then truncates at the first index reaching the target.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let started = Instant::now();
    let exec = Executor::new(cfg.workers);
    let chunk = (64 * cfg.workers.max(1)) as u64;
    let limit = cfg.max_samples.unwrap_or(u64::MAX);

    let mut outcomes: Vec<SampleOutcome> = Vec::new();
    let mut real = 0;
    let mut next = 0u64;
    let mut reached = false;
    'outer: while next < limit {
        let end = next.saturating_add(chunk).min(limit);
        let batch = exec.map(next..end, |i| {
            sample_one(&cfg.shape, cfg.r, i, cfg.master_seed, &cfg.tracker).expect("validated config")
        });
        next = end;
        for o in batch {
            let is_real = o.kind == SampleKind::Real;
            outcomes.push(o);
            if is_real {
                real += 1;
                if real >= cfg.target_real_count {
                    reached = true;
                    break 'outer;
                }
            }
        }
    }

    let counts = Counts::from_outcomes(&outcomes);
    Ok(CampaignResult {
        shape: cfg.shape.clone(),
        r: cfg.r,
        master_seed: cfg.master_seed,
        real_fraction: counts.real_fraction(),
        counts,
        outcomes,
        wall_time: started.elapsed().as_secs_f64(),
        reached_target: reached,
    })
}

/// Runs exactly `count` samples (indices `0..count`), regardless of outcome.
pub fn run_fixed(
    shape: &Shape,
    r: usize,
    count: u64,
    master_seed: u64,
    tracker: &TrackerConfig,
    workers: usize,
) -> Result<CampaignResult> {
    check_perfect(shape, r)?;
    tracker.validate()?;
    let started = Instant::now();
    let outcomes = Executor::new(workers).map(0..count, |i| {
        sample_one(shape, r, i, master_seed, tracker).expect("validated config")
    });
    let counts = Counts::from_outcomes(&outcomes);
    Ok(CampaignResult {
        shape: shape.clone(),
        r,
        master_seed,
        real_fraction: counts.real_fraction(),
        counts,
        outcomes,
        wall_time: started.elapsed().as_secs_f64(),
        reached_target: true,
    })
}

/// Condition numbers `(κ, κ_ang)` of `count` random CPDs with Gaussian factors.
pub fn sample_random_output<R: Rng + ?Sized>(
    shape: &Shape,
    r: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    (0..count)
        .map(|_| {
            let c = random_cpd(shape, r, rng)?;
            Ok((kappa(&c).0, kappa_angular(&c).0))
        })
        .collect()
}

pub const CSV_HEADER: &str = "shape,r,seed_index,kind,kappa,kappa_ang,tensor_norm,steps";

/// Per-sample CSV; missing condition numbers are empty fields, `∞` is `inf`.
pub fn write_samples_csv<W: Write>(result: &CampaignResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    let shape = result.shape.to_string();
    let r = result.r.to_string();
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for o in &result.outcomes {
        w.write_record([
            shape.as_str(),
            r.as_str(),
            &o.seed_index.to_string(),
            o.kind.as_str(),
            &opt(o.kappa),
            &opt(o.kappa_angular),
            &fmt_f64(o.tensor_norm),
            &o.steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub shape: String,
    pub r: usize,
    pub master_seed: u64,
    pub samples: usize,
    pub real: usize,
    pub complex: usize,
    pub failed: usize,
    pub real_fraction: f64,
    pub failure_rate: f64,
    pub reached_target: bool,
    pub wall_time_seconds: f64,
}

impl CampaignResult {
    pub fn summary(&self) -> CampaignSummary {
        CampaignSummary {
            shape: self.shape.to_string(),
            r: self.r,
            master_seed: self.master_seed,
            samples: self.outcomes.len(),
            real: self.counts.real,
            complex: self.counts.complex,
            failed: self.counts.failed,
            real_fraction: self.real_fraction,
            failure_rate: self.counts.failure_rate(),
            reached_target: self.reached_target,
            wall_time_seconds: self.wall_time,
        }
    }

    /// Condition numbers of the real outcomes, `∞` included.
    pub fn real_kappas(&self) -> (Vec<f64>, Vec<f64>) {
        self.outcomes
            .iter()
            .filter(|o| o.kind == SampleKind::Real)
            .map(|o| {
                (
                    o.kappa.unwrap_or(f64::INFINITY),
                    o.kappa_angular.unwrap_or(f64::INFINITY),
                )
            })
            .unzip()
    }
}
