//! Predictor-corrector path tracking for the decomposition system.
//!
//! The homotopy `H(x, t) = (1−t)·γ·(E(x) − 𝒜_0) + t·(E(x) − 𝒜)` with `E` the
//! pinned evaluation map is equivalent to `E(x) = B(t)` with
//! `B(t) = ((1−t)γ𝒜_0 + t𝒜)/c(t)`, `c(t) = (1−t)γ + t`, and
//! `B'(t) = γ(𝒜 − 𝒜_0)/c(t)²`. The tracker works with that form: an Euler
//! step on `J dx/dt = B'(t)`, then Newton on `E(x) = B(t)`.

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::system::{complexify, evaluate, jacobian_into, term_scale, PinnedVariables};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Solutions whose coordinates grow past this are treated as diverging.
const DIVERGENCE_NORM: f64 = 1e8;
const POLISH_ITERS: usize = 20;
const SUCCESSES_BEFORE_EXPANSION: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Relative residual tolerance of the corrector.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub step_expansion: f64,
    pub realness_tol: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            initial_step: 0.05,
            min_step: 1e-7,
            max_steps: 10_000,
            newton_tol: 1e-12,
            max_newton_iters: 3,
            step_expansion: 1.5,
            realness_tol: 1e-8,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.initial_step,
            self.min_step,
            self.newton_tol,
            self.step_expansion,
            self.realness_tol,
        ];
        if positive.iter().any(|&v| !(v > 0.0 && v.is_finite())) || self.max_steps == 0 || self.max_newton_iters == 0 {
            return Err(Error::InvalidArgument("tracker parameters must be positive".into()));
        }
        if self.min_step >= self.initial_step {
            return Err(Error::InvalidArgument("min_step must be below initial_step".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrackStatus {
    Converged,
    StepUnderflow,
    MaxStepsExceeded,
    NewtonDivergence,
    SingularJacobian,
}

#[derive(Clone, Debug)]
pub struct TrackResult {
    pub status: TrackStatus,
    /// Present iff `status == Converged`.
    pub solution: Option<PinnedVariables>,
    pub steps_taken: usize,
    /// `‖𝒜 − E(x)‖_∞` at the last iterate.
    pub final_residual: f64,
}

impl TrackResult {
    fn failed(status: TrackStatus, steps_taken: usize, final_residual: f64) -> Self {
        TrackResult {
            status,
            solution: None,
            steps_taken,
            final_residual,
        }
    }
}

fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Per-path state: the homotopy data and reusable buffers.
struct Path {
    gamma: Complex64,
    start: Vec<Complex64>,
    target: Vec<Complex64>,
    diff: Vec<Complex64>,
    jac: DMatrix<Complex64>,
}

impl Path {
    fn c(&self, t: f64) -> Complex64 {
        self.gamma * (1.0 - t) + t
    }

    fn b(&self, t: f64) -> Vec<Complex64> {
        let c = self.c(t);
        self.start
            .iter()
            .zip(&self.target)
            .map(|(a0, a)| (self.gamma * (1.0 - t) * a0 + a * t) / c)
            .collect()
    }

    fn db(&self, t: f64) -> DVector<Complex64> {
        let c = self.c(t);
        let s = self.gamma / (c * c);
        DVector::from_iterator(self.diff.len(), self.diff.iter().map(|d| d * s))
    }

    fn lu(&mut self, x: &PinnedVariables) -> LU<Complex64, nalgebra::Dyn, nalgebra::Dyn> {
        jacobian_into(x, &mut self.jac);
        self.jac.clone().lu()
    }
}

fn solve(lu: &LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>, rhs: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    lu.solve(rhs)
        .filter(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}

enum Newton {
    Converged(PinnedVariables, LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>),
    Failed,
    Singular,
}

/// At most `iters` Newton steps on `E(x) = b`; the residual has to shrink
/// at every step.
fn newton(path: &mut Path, mut x: PinnedVariables, b: &[Complex64], tol: f64, iters: usize) -> Newton {
    let bnorm = inf_norm(b);
    let mut prev = f64::INFINITY;
    let mut last_lu = None;
    for iter in 0..=iters {
        let e = evaluate(&x);
        let r: Vec<Complex64> = b.iter().zip(&e).map(|(bi, ei)| bi - ei).collect();
        let res = inf_norm(&r);
        if !res.is_finite() || res >= prev {
            return Newton::Failed;
        }
        if res <= tol * (1.0 + bnorm + term_scale(&x)) {
            let lu = last_lu.unwrap_or_else(|| path.lu(&x));
            return Newton::Converged(x, lu);
        }
        if iter == iters {
            break;
        }
        prev = res;
        let lu = path.lu(&x);
        let Some(dx) = solve(&lu, &DVector::from_vec(r)) else {
            return Newton::Singular;
        };
        x.values_mut().iter_mut().zip(dx.iter()).for_each(|(xi, d)| *xi += d);
        last_lu = Some(lu);
    }
    Newton::Failed
}

/// Tracks `start_solution` from the start system `E(x) = start_tensor` to
/// `E(x) = target`. `rng` supplies the random unit-modulus `γ`.
///
/// Numerical failures are reported through [`TrackStatus`], never as errors.
pub fn track<R: Rng + ?Sized>(
    start_tensor: &DenseTensor,
    start_solution: &PinnedVariables,
    target: &DenseTensor,
    cfg: &TrackerConfig,
    rng: &mut R,
) -> TrackResult {
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    track_with_gamma(
        start_tensor,
        start_solution,
        target,
        cfg,
        Complex64::from_polar(1.0, theta),
    )
}

pub fn track_with_gamma(
    start_tensor: &DenseTensor,
    start_solution: &PinnedVariables,
    target: &DenseTensor,
    cfg: &TrackerConfig,
    gamma: Complex64,
) -> TrackResult {
    let n = start_solution.len();
    let start = complexify(start_tensor);
    let tgt = complexify(target);
    let diff: Vec<Complex64> = tgt.iter().zip(&start).map(|(a, a0)| a - a0).collect();
    let stationary = inf_norm(&diff) <= cfg.newton_tol * (1.0 + inf_norm(&tgt));
    let mut path = Path {
        gamma,
        start,
        target: tgt,
        diff,
        jac: DMatrix::from_element(start_tensor.shape().pi(), n, Complex64::new(0.0, 0.0)),
    };

    let mut x = start_solution.clone();
    let mut steps = 0;
    if !stationary {
        let mut t = 0.0;
        let mut h = cfg.initial_step;
        let mut streak = 0;
        let mut lu = path.lu(&x);
        while t < 1.0 {
            if steps >= cfg.max_steps {
                return TrackResult::failed(TrackStatus::MaxStepsExceeded, steps, residual_inf(&x, &path.target));
            }
            steps += 1;
            h = h.min(1.0 - t);
            let t1 = if h >= 1.0 - t { 1.0 } else { t + h };
            let Some(dx) = solve(&lu, &path.db(t)) else {
                return TrackResult::failed(TrackStatus::SingularJacobian, steps, residual_inf(&x, &path.target));
            };
            let mut pred = x.clone();
            pred.values_mut()
                .iter_mut()
                .zip(dx.iter())
                .for_each(|(xi, d)| *xi += d * (t1 - t));
            let b1 = path.b(t1);
            match newton(&mut path, pred, &b1, cfg.newton_tol, cfg.max_newton_iters) {
                Newton::Converged(x1, lu1) => {
                    if x1.norm() > DIVERGENCE_NORM {
                        return TrackResult::failed(
                            TrackStatus::NewtonDivergence,
                            steps,
                            residual_inf(&x1, &path.target),
                        );
                    }
                    x = x1;
                    lu = lu1;
                    t = t1;
                    streak += 1;
                    if streak >= SUCCESSES_BEFORE_EXPANSION {
                        h *= cfg.step_expansion;
                        streak = 0;
                    }
                }
                Newton::Failed | Newton::Singular => {
                    streak = 0;
                    h *= 0.5;
                    if h < cfg.min_step {
                        return TrackResult::failed(TrackStatus::StepUnderflow, steps, residual_inf(&x, &path.target));
                    }
                }
            }
        }
    }

    polish(&mut path, x, cfg, steps)
}

fn residual_inf(x: &PinnedVariables, target: &[Complex64]) -> f64 {
    let e = evaluate(x);
    target.iter().zip(&e).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Newton at `t = 1` until the residual stops improving, then the final
/// acceptance checks.
fn polish(path: &mut Path, mut x: PinnedVariables, cfg: &TrackerConfig, steps: usize) -> TrackResult {
    let target = path.target.clone();
    let tol = cfg.newton_tol * (1.0 + inf_norm(&target));
    let mut res = residual_inf(&x, &target);
    for _ in 0..POLISH_ITERS {
        let e = evaluate(&x);
        let r: Vec<Complex64> = target.iter().zip(&e).map(|(a, b)| a - b).collect();
        let lu = path.lu(&x);
        let Some(dx) = solve(&lu, &DVector::from_vec(r)) else {
            return TrackResult::failed(TrackStatus::SingularJacobian, steps, res);
        };
        let mut x1 = x.clone();
        x1.values_mut().iter_mut().zip(dx.iter()).for_each(|(xi, d)| *xi += d);
        let res1 = residual_inf(&x1, &target);
        let small_update = dx.iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-15 * (1.0 + x.norm());
        if res1.is_nan() || res1 >= res {
            if res <= tol {
                break;
            }
            if !res1.is_finite() {
                return TrackResult::failed(TrackStatus::NewtonDivergence, steps, res);
            }
        }
        if res1 <= res {
            x = x1;
            res = res1;
        }
        if small_update || res <= 1e-3 * tol {
            break;
        }
    }
    if !res.is_finite() || x.norm() > DIVERGENCE_NORM || res > tol {
        return TrackResult::failed(TrackStatus::NewtonDivergence, steps, res);
    }
    jacobian_into(&x, &mut path.jac);
    let s = path.jac.clone().singular_values();
    if s.min() <= 1e-14 * s.max() {
        return TrackResult::failed(TrackStatus::SingularJacobian, steps, res);
    }
    TrackResult {
        status: TrackStatus::Converged,
        solution: Some(x),
        steps_taken: steps,
        final_residual: res,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homotopy::{build_start, to_cpd};
    use crate::tensor::{cpd_eval, Shape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn stationary_path_only_polishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (t, x) = build_start(&shape(&[3, 3, 2]), 3, &mut rng).unwrap();
        let res = track(&t, &x, &t, &TrackerConfig::default(), &mut rng);
        assert_eq!(res.status, TrackStatus::Converged);
        assert!(res.steps_taken <= 2);
        let sol = res.solution.unwrap();
        let d: f64 = sol
            .values()
            .iter()
            .zip(x.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(d < 1e-10);
    }

    #[test]
    fn tracks_between_real_rank_two_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = shape(&[2, 2, 2]);
        let cfg = TrackerConfig::default();
        let mut converged = 0;
        for _ in 0..50 {
            let (t0, x0) = build_start(&s, 2, &mut rng).unwrap();
            let (t1, _) = build_start(&s, 2, &mut rng).unwrap();
            let res = track(&t0, &x0, &t1, &cfg, &mut rng);
            if let Some(x) = res.solution {
                converged += 1;
                assert!(res.final_residual <= cfg.newton_tol * (1.0 + 8.0 * t1.frobenius_norm()));
                assert!(x.imag_norm() < 1e-8);
                let back = cpd_eval(&to_cpd(&x).unwrap());
                assert!(back.sub(&t1).unwrap().frobenius_norm() < 1e-9 * t1.frobenius_norm());
            }
        }
        assert!(converged >= 49);
    }

    #[test]
    fn endpoint_does_not_depend_on_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = shape(&[2, 2, 2]);
        let cfg = TrackerConfig::default();
        let (t0, x0) = build_start(&s, 2, &mut rng).unwrap();
        let (t1, _) = build_start(&s, 2, &mut rng).unwrap();
        let ends: Vec<_> = [0.3, 1.7, 4.0]
            .iter()
            .filter_map(|&th| track_with_gamma(&t0, &x0, &t1, &cfg, Complex64::from_polar(1.0, th)).solution)
            .map(|x| cpd_eval(&to_cpd(&x).unwrap()))
            .collect();
        assert!(!ends.is_empty());
        for e in &ends {
            assert!(e.sub(&t1).unwrap().frobenius_norm() < 1e-9);
        }
    }

    #[test]
    fn scaled_target_scales_first_factor() {
        // E is linear in the first-mode coordinates, so a solution for c·𝒜 is
        // the solution for 𝒜 with those coordinates multiplied by c.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = shape(&[2, 2, 2]);
        let cfg = TrackerConfig::default();
        let (t0, x0) = build_start(&s, 2, &mut rng).unwrap();
        let (t1, _) = build_start(&s, 2, &mut rng).unwrap();
        let g = Complex64::from_polar(1.0, 0.9);
        let a = track_with_gamma(&t0, &x0, &t1, &cfg, g).solution.unwrap();
        let b = track_with_gamma(&t0, &x0, &t1.scaled(3.0), &cfg, g).solution.unwrap();
        let ca = to_cpd(&a).unwrap();
        let cb = to_cpd(&b).unwrap();
        let m = crate::homotopy::term_mismatch(&ca.scaled(3.0).unwrap(), &cb).unwrap();
        assert!(m < 1e-9, "{m}");
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        let bad = [
            TrackerConfig {
                min_step: 1.0,
                ..TrackerConfig::default()
            },
            TrackerConfig {
                newton_tol: f64::NAN,
                ..TrackerConfig::default()
            },
            TrackerConfig {
                max_newton_iters: 0,
                ..TrackerConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
