//! Decomposition of a given tensor by tracking from random start systems.

use rand::Rng;

use super::system::{build_start, to_cpd, PinnedVariables};
use super::tracker::{track, TrackStatus, TrackerConfig};
use crate::error::{Error, Result};
use crate::tensor::{cpd_eval, CpDecomposition, DenseTensor};

pub const DECOMPOSE_ATTEMPTS: usize = 3;

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub solution: PinnedVariables,
    /// Real part of the solution as a normalized CPD.
    pub cpd: CpDecomposition,
    /// `‖𝒜 − cpd‖_F / ‖𝒜‖_F`.
    pub relative_residual: f64,
    /// Start systems used, including the successful one.
    pub attempts: usize,
}

/// Tracks from up to `max_attempts` fresh start systems until one path
/// converges to a real solution.
///
/// Returns `Ok(None)` when every attempt fails or ends complex.
pub fn decompose<R: Rng + ?Sized>(
    target: &DenseTensor,
    r: usize,
    cfg: &TrackerConfig,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Option<Decomposition>> {
    cfg.validate()?;
    let norm = target.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("cannot decompose the zero tensor".into()));
    }
    for attempt in 1..=max_attempts {
        let (start_t, start_x) = build_start(target.shape(), r, rng)?;
        let res = track(&start_t, &start_x, target, cfg, rng);
        let Some(x) = res.solution else {
            debug_assert_ne!(res.status, TrackStatus::Converged);
            continue;
        };
        if !super::classify_real(&x, cfg.realness_tol) {
            continue;
        }
        let Ok(cpd) = to_cpd(&x) else { continue };
        let relative_residual = target.sub(&cpd_eval(&cpd))?.frobenius_norm() / norm;
        return Ok(Some(Decomposition {
            solution: x,
            cpd,
            relative_residual,
            attempts: attempt,
        }));
    }
    Ok(None)
}

/// Largest relative Frobenius distance between matched rank-1 terms,
/// minimized over all pairings of the terms of `a` with those of `b`.
///
/// Terms are compared as dense tensors, so factor signs do not matter.
pub fn term_mismatch(a: &CpDecomposition, b: &CpDecomposition) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            left: a.shape().clone(),
            right: b.shape().clone(),
        });
    }
    if a.rank() != b.rank() {
        return Err(Error::InvalidArgument(format!(
            "ranks differ: {} vs {}",
            a.rank(),
            b.rank()
        )));
    }
    let da: Vec<DenseTensor> = a.terms().iter().map(|t| t.to_dense()).collect();
    let db: Vec<DenseTensor> = b.terms().iter().map(|t| t.to_dense()).collect();
    let cost: Vec<Vec<f64>> = da
        .iter()
        .map(|x| {
            let n = x.frobenius_norm();
            db.iter()
                .map(|y| x.sub(y).map(|d| d.frobenius_norm() / n).unwrap_or(f64::INFINITY))
                .collect()
        })
        .collect();
    let mut used = vec![false; db.len()];
    let mut best = f64::INFINITY;
    bottleneck(&cost, 0, 0.0, &mut used, &mut best);
    Ok(best)
}

fn bottleneck(cost: &[Vec<f64>], row: usize, acc: f64, used: &mut [bool], best: &mut f64) {
    if acc >= *best {
        return;
    }
    if row == cost.len() {
        *best = acc;
        return;
    }
    for j in 0..used.len() {
        if !used[j] {
            used[j] = true;
            bottleneck(cost, row + 1, acc.max(cost[row][j]), used, best);
            used[j] = false;
        }
    }
}
