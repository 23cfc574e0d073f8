//! Regular and angular condition numbers of a CPD.
//!
//! The regular condition number is `κ = 1/ς_min([U_1 ... U_r])` with `U_i`
//! the tangent basis of term `i`. The angular condition number measures the
//! sensitivity of the normalized summands only:
//! `κ_ang = 1/ς_min((I − MM†)L)` where `M = [𝒰_1 ... 𝒰_r]` holds the unit
//! rank-1 tensors and `L = [λ_1 L_1 ... λ_r L_r]` the scaled mode blocks.
//! The angular formula is used for every rank, not only rank 2.
//!
//! Either number is reported as `+∞` when the relevant smallest singular
//! value is at most `1e-14` times the largest.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_TOL};
use crate::segre::{tangent_basis, terracini};
use crate::tensor::CpDecomposition;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    #[serde(with = "crate::numfmt::inf_f64")]
    pub kappa: f64,
    #[serde(with = "crate::numfmt::inf_f64")]
    pub kappa_angular: f64,
    pub sigma_min_regular: f64,
    pub sigma_min_angular: f64,
}

/// `1/ς_min` with the `∞` sentinel, plus `ς_min` itself.
fn inverse_sigma_min(m: &DMatrix<f64>) -> (f64, f64) {
    let s = linalg::singular_values(m);
    let (smax, smin) = match (s.first(), s.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return (f64::INFINITY, 0.0),
    };
    if smin <= RANK_TOL * smax || smin == 0.0 {
        (f64::INFINITY, smin)
    } else {
        (1.0 / smin, smin)
    }
}

/// Regular condition number `κ` and the smallest singular value of the
/// Terracini matrix. `∞` when `rΣ > Π`.
pub fn kappa(cpd: &CpDecomposition) -> (f64, f64) {
    inverse_sigma_min(&terracini(cpd).columns)
}

/// `M` and `L` of the angular formula.
pub fn angular_blocks(cpd: &CpDecomposition) -> (DMatrix<f64>, DMatrix<f64>) {
    let shape = cpd.shape();
    let (sigma, pi, r) = (shape.sigma(), shape.pi(), cpd.rank());
    let mut m = DMatrix::zeros(pi, r);
    let mut l = DMatrix::zeros(pi, r * (sigma - 1));
    for (i, term) in cpd.terms().iter().enumerate() {
        let b = tangent_basis(term);
        m.column_mut(i).copy_from(&b.columns.column(0));
        let scaled = b.mode_blocks() * term.scale();
        l.columns_mut(i * (sigma - 1), sigma - 1).copy_from(&scaled);
    }
    (m, l)
}

/// `(I − MM†)L`.
pub fn projected_angular_matrix(cpd: &CpDecomposition) -> DMatrix<f64> {
    let (m, l) = angular_blocks(cpd);
    linalg::project_out(&m, &l)
}

/// Angular condition number `κ_ang` and the smallest singular value of
/// `(I − MM†)L`.
pub fn kappa_angular(cpd: &CpDecomposition) -> (f64, f64) {
    inverse_sigma_min(&projected_angular_matrix(cpd))
}

pub fn condition_report(cpd: &CpDecomposition) -> ConditionReport {
    let (kappa, sigma_min_regular) = kappa(cpd);
    let (kappa_angular, sigma_min_angular) = kappa_angular(cpd);
    ConditionReport {
        kappa,
        kappa_angular,
        sigma_min_regular,
        sigma_min_angular,
    }
}

fn require_rank2(cpd: &CpDecomposition) -> Result<()> {
    if cpd.rank() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected a rank-2 decomposition, got rank {}",
            cpd.rank()
        )));
    }
    Ok(())
}

/// Jacobian determinant of `(λ, u, μ, v) ↦ λ𝒰 + μ𝒱` as
/// `λ^{Σ−1} μ^{Σ−1} vol([U V])`.
pub fn jacobian_rank2(cpd: &CpDecomposition) -> Result<f64> {
    require_rank2(cpd)?;
    let e = (cpd.shape().sigma() - 1) as i32;
    let (lam, mu) = (cpd.terms()[0].scale(), cpd.terms()[1].scale());
    Ok(lam.powi(e) * mu.powi(e) * linalg::vol(&terracini(cpd).columns))
}

/// `Q = [λL_1  μL_2  𝒰  𝒱]`, the matrix of partial derivatives of the same map.
pub fn jacobian_matrix_rank2(cpd: &CpDecomposition) -> Result<DMatrix<f64>> {
    require_rank2(cpd)?;
    let (m, l) = angular_blocks(cpd);
    Ok(linalg::hcat(&[&l, &m]))
}
