//! Numerical oracles for identities and inequalities of the rank-2
//! condition-number analysis.
//!
//! Every oracle is deterministic given its inputs and returns an
//! [`OracleReport`]. [`run_suite`] runs the whole set with one rng stream per
//! oracle.

mod algebraic;
mod analytic;
pub mod quadrature;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{random_unit_vector, CpDecomposition, Rank1Term, Shape};

pub use algebraic::{
    check_gram_blocks, check_jacobian_factorization, check_norm_sandwich, check_q_lower_bound, check_vol_factorization,
    Q_BOUND_EPSILONS,
};
pub use analytic::{
    check_cos_inequality, check_integral_bound_scaling, check_integral_lower_scaling, check_q_upper_scaling,
    polar_identity_cases, quad_check_polar_identities, PolarCase, SCALING_SWEEP,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub trials: usize,
    #[serde(with = "crate::numfmt::inf_f64")]
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Free-form diagnostics; empty when there is nothing to add.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl OracleReport {
    /// `passed` is derived: `max_violation ≤ tolerance`, and NaN fails.
    pub fn new(name: &str, trials: usize, max_violation: f64, tolerance: f64) -> Self {
        OracleReport {
            name: name.to_string(),
            trials,
            max_violation,
            tolerance,
            passed: max_violation <= tolerance,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// `name trials max_violation tolerance PASS|FAIL`.
    pub fn line(&self) -> String {
        let mut s = format!(
            "{:<32} trials={:<8} max_violation={:<12.4e} tolerance={:<10.3e} {}",
            self.name,
            self.trials,
            self.max_violation,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        );
        if !self.detail.is_empty() {
            s.push_str("  ");
            s.push_str(&self.detail);
        }
        s
    }
}

/// Default ε for D(ε) sampling.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Default node count per axis for the 2-D polar quadrature.
pub const DEFAULT_GRID: usize = quadrature::NODES_2D;
/// Default `a` exponents for the angular integral scaling check.
pub const DEFAULT_A_VALUES: [f64; 5] = [1.0, 2.0, 3.0, 7.0, 11.0];
/// Default number of direction pairs per exponent in the scaling checks.
pub const DEFAULT_PAIRS: usize = 20;

/// Shapes cycled through by the random-configuration oracles.
pub(crate) fn oracle_shapes() -> Vec<Shape> {
    [vec![2, 2, 2], vec![3, 3, 2], vec![3, 2, 2, 2], vec![4, 3, 3]]
        .into_iter()
        .map(|d| Shape::new(d).expect("valid shape"))
        .collect()
}

/// Oracle names in suite order.
pub const ORACLE_NAMES: [&str; 10] = [
    "check_vol_factorization",
    "check_jacobian_factorization",
    "check_gram_blocks",
    "check_norm_sandwich",
    "check_q_lower_bound",
    "quad_check_polar_identities",
    "check_cos_inequality",
    "check_integral_bound_scaling",
    "check_integral_lower_scaling",
    "check_q_upper_scaling",
];

/// Runs every oracle (or only `only`) with `trials` random configurations
/// where applicable. Oracle `i` draws from stream `i` of `seed`.
pub fn run_suite(trials: usize, seed: u64, only: Option<&str>) -> Result<Vec<OracleReport>> {
    if let Some(name) = only {
        if !ORACLE_NAMES.contains(&name) {
            return Err(Error::InvalidArgument(format!("unknown oracle '{name}'")));
        }
    }
    let mut reports = Vec::new();
    for (i, name) in ORACLE_NAMES.iter().enumerate() {
        if only.is_some_and(|o| o != *name) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        reports.push(run_one(name, trials, &mut rng));
    }
    Ok(reports)
}

fn run_one(name: &str, trials: usize, rng: &mut ChaCha8Rng) -> OracleReport {
    match name {
        "check_vol_factorization" => check_vol_factorization(trials, rng),
        "check_jacobian_factorization" => check_jacobian_factorization(trials, rng),
        "check_gram_blocks" => check_gram_blocks(trials, rng, DEFAULT_EPSILON),
        "check_norm_sandwich" => check_norm_sandwich(trials, rng, DEFAULT_EPSILON),
        "check_q_lower_bound" => check_q_lower_bound(trials, rng, DEFAULT_EPSILON),
        "quad_check_polar_identities" => quad_check_polar_identities(DEFAULT_GRID),
        "check_cos_inequality" => check_cos_inequality(analytic::DEFAULT_COS_GRID),
        "check_integral_bound_scaling" => check_integral_bound_scaling(&DEFAULT_A_VALUES, DEFAULT_PAIRS, rng),
        "check_integral_lower_scaling" => check_integral_lower_scaling(DEFAULT_PAIRS, rng),
        "check_q_upper_scaling" => check_q_upper_scaling(DEFAULT_PAIRS, rng),
        _ => unreachable!("names are validated"),
    }
}

/// A point on the unit sphere at chord distance `dist` from the unit vector
/// `u`, in a uniformly random direction.
pub(crate) fn at_distance<R: Rng + ?Sized>(u: &[f64], dist: f64, rng: &mut R) -> Vec<f64> {
    let w = random_tangent(u, rng);
    along(u, &w, dist)
}

/// Unit vector orthogonal to the unit vector `u`. Needs `u.len() ≥ 2`.
pub(crate) fn random_tangent<R: Rng + ?Sized>(u: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut w = random_unit_vector(u.len(), rng);
        let c: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
        w.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        let n = norm(&w);
        if n > 1e-3 {
            w.iter_mut().for_each(|a| *a /= n);
            return w;
        }
    }
}

/// `cos φ·u + sin φ·w` with `φ` chosen so that `‖u − result‖ = dist`.
pub(crate) fn along(u: &[f64], w: &[f64], dist: f64) -> Vec<f64> {
    let phi = 2.0 * (0.5 * dist).asin();
    let (s, c) = phi.sin_cos();
    u.iter().zip(w).map(|(a, b)| c * a + s * b).collect()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A pair of factor tuples.
pub type TuplePair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Membership in `D(ε)`: `0.9‖u¹−v¹‖ < ‖u^k−v^k‖ < ‖u¹−v¹‖ < ε` for `k ≥ 2`.
pub fn in_d_epsilon(u: &[Vec<f64>], v: &[Vec<f64>], epsilon: f64) -> bool {
    let d1 = dist(&u[0], &v[0]);
    d1 < epsilon
        && u.iter().zip(v).skip(1).all(|(a, b)| {
            let dk = dist(a, b);
            0.9 * d1 < dk && dk < d1
        })
}

/// Draws a pair of unit factor tuples in `D(ε)`: `u` uniform, `v¹` at a
/// random distance below `ε` from `u¹`, and each later `v^k` at a distance in
/// `(0.9, 1)·‖u¹ − v¹‖` from `u^k`. Candidates are redrawn until membership
/// holds after rounding.
pub fn sample_d_epsilon<R: Rng + ?Sized>(shape: &Shape, epsilon: f64, rng: &mut R) -> TuplePair {
    assert!(shape.dims().iter().all(|&n| n >= 2), "D(eps) needs every n_k >= 2");
    loop {
        let u: Vec<Vec<f64>> = shape.dims().iter().map(|&n| random_unit_vector(n, rng)).collect();
        let d1 = epsilon * rng.random_range(0.01..1.0);
        let v: Vec<Vec<f64>> = u
            .iter()
            .enumerate()
            .map(|(k, uk)| {
                let dk = if k == 0 { d1 } else { d1 * rng.random_range(0.9..1.0) };
                at_distance(uk, dk, rng)
            })
            .collect();
        if in_d_epsilon(&u, &v, epsilon) {
            return (u, v);
        }
    }
}

/// The rank-2 decomposition `λ·⊗u + μ·⊗v`.
pub(crate) fn rank2(shape: &Shape, lam: f64, u: &[Vec<f64>], mu: f64, v: &[Vec<f64>]) -> CpDecomposition {
    let t1 = Rank1Term::new(lam, u.to_vec()).expect("unit factors");
    let t2 = Rank1Term::new(mu, v.to_vec()).expect("unit factors");
    CpDecomposition::new(shape.clone(), vec![t1, t2]).expect("matching shapes")
}

/// Dense `⊗ₖ vₖ`.
pub(crate) fn outer(factors: &[Vec<f64>]) -> Vec<f64> {
    let refs: Vec<&[f64]> = factors.iter().map(|f| f.as_slice()).collect();
    let len = factors.iter().map(|f| f.len()).product();
    let mut out = vec![0.0; len];
    crate::tensor::outer_into(&refs, &mut out);
    out
}
