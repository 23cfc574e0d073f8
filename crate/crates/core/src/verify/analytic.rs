//! Quadrature identities, the cosine product inequality, and scaling checks
//! for inequalities whose constants are not explicit.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use super::quadrature::{angular_nodes, integrate_angle, Rule, NODES_1D};
use super::{along, dist, norm, outer, random_tangent, rank2, OracleReport};
use crate::condition::angular_blocks;
use crate::linalg::{project_out, q_value};
use crate::tensor::{random_unit_vector, Shape};

/// Geometric sweep of distances used by the scaling checks.
pub const SCALING_SWEEP: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
/// Largest allowed growth of a compensated quantity between consecutive sweep points.
pub const SCALING_RATIO_TOL: f64 = 1.5;
/// Grid points per axis for the cosine inequality with `d ≤ 2`.
pub const DEFAULT_COS_GRID: usize = 64;
/// Radial cutoff in units of the Gaussian width, beyond the mode `sqrt(2Σ)`.
const RADIAL_MARGIN: f64 = 10.0;
/// Seed of the fixed random pairs used by the polar identities.
const POLAR_SEED: u64 = 31;

/// One `(𝒰, 𝒱)` configuration for the polar identities.
#[derive(Clone, Debug)]
pub struct PolarCase {
    pub label: String,
    pub shape: Shape,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Exact value of the double integral `∫∫ λ^{Σ−1}μ^{Σ−1}e^{−‖λ𝒰+μ𝒱‖²/2}`, when known.
    pub exact: Option<f64>,
    /// Whether the angular integrand is identically zero (coincident terms).
    pub degenerate_angular: bool,
}

fn e(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Coincident terms, cross-orthogonal terms, and two random pairs.
pub fn polar_identity_cases() -> Vec<PolarCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(POLAR_SEED);
    let s222 = Shape::new(vec![2, 2, 2]).expect("valid");
    let s322 = Shape::new(vec![3, 2, 2]).expect("valid");
    let tuple = |shape: &Shape, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        shape.dims().iter().map(|&n| random_unit_vector(n, rng)).collect()
    };
    let sig = s222.sigma() as f64;
    let same = tuple(&s222, &mut rng);
    let mut cases = vec![
        PolarCase {
            label: "coincident".into(),
            shape: s222.clone(),
            u: same.clone(),
            v: same,
            // with 𝒰 = 𝒱 the integrand depends on λ+μ only
            exact: Some(2f64.powf(sig - 1.0) * gamma(sig).powi(3) / gamma(2.0 * sig)),
            degenerate_angular: true,
        },
        PolarCase {
            label: "cross-orthogonal".into(),
            shape: s222.clone(),
            u: vec![e(2, 0); 3],
            v: vec![e(2, 1); 3],
            // the integrand factorizes into two half-line Gaussian moments
            exact: Some(2f64.powf(sig - 2.0) * gamma(sig / 2.0).powi(2)),
            degenerate_angular: false,
        },
    ];
    for shape in [s222, s322] {
        let (u, v) = (tuple(&shape, &mut rng), tuple(&shape, &mut rng));
        cases.push(PolarCase {
            label: format!("random {shape}"),
            shape,
            u,
            v,
            exact: None,
            degenerate_angular: false,
        });
    }
    cases
}

/// `‖cos θ·𝒰 + sin θ·𝒱‖²` evaluated densely.
fn mixed_norm_sq(tu: &[f64], tv: &[f64], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    tu.iter().zip(tv).map(|(a, b)| (c * a + s * b).powi(2)).sum()
}

/// Polar double integral `∫₀^{π/2}∫₀^∞ ρ f(ρ, θ) dρ dθ` with `grid` nodes per
/// axis, where the radial range is cut at `(sqrt(2Σ) + margin)/‖c𝒰+s𝒱‖`.
fn polar_double<F>(tu: &[f64], tv: &[f64], sigma: f64, grid: usize, mut f: F) -> f64
where
    F: FnMut(f64, f64, f64) -> f64,
{
    let radial = Rule::new(grid);
    let mut total = 0.0;
    for (theta, wt) in angular_nodes(grid) {
        let nsq = mixed_norm_sq(tu, tv, theta);
        let cut = ((2.0 * sigma).sqrt() + RADIAL_MARGIN) / nsq.sqrt();
        let inner: f64 = radial
            .mapped(0.0, cut)
            .map(|(rho, wr)| wr * rho * f(rho, theta, nsq))
            .sum();
        total += wt * inner;
    }
    total
}

/// Both sides of the polar identity for `∫∫ λ^{Σ−1}μ^{Σ−1}e^{−‖λ𝒰+μ𝒱‖²/2}`:
/// the 2-D quadrature and `2^{Σ−1}Γ(Σ)∫(cs)^{Σ−1}/‖c𝒰+s𝒱‖^{2Σ}dθ`.
pub fn gaussian_moment_sides(case: &PolarCase, grid: usize) -> (f64, f64) {
    let (tu, tv) = (outer(&case.u), outer(&case.v));
    let sigma = case.shape.sigma() as f64;
    let lhs = polar_double(&tu, &tv, sigma, grid, |rho, theta, nsq| {
        let (s, c) = theta.sin_cos();
        let (lam, mu) = (rho * c, rho * s);
        (lam * mu).powf(sigma - 1.0) * (-0.5 * rho * rho * nsq).exp()
    });
    let rhs = 2f64.powf(sigma - 1.0)
        * gamma(sigma)
        * integrate_angle(NODES_1D, |theta| {
            let (s, c) = theta.sin_cos();
            (c * s).powf(sigma - 1.0) / mixed_norm_sq(&tu, &tv, theta).powf(sigma)
        });
    (lhs, rhs)
}

/// `(I − MM†)[L₁ L₂]` at unit weights, split into its two halves.
fn projected_halves(case: &PolarCase) -> (DMatrix<f64>, DMatrix<f64>) {
    let cpd = rank2(&case.shape, 1.0, &case.u, 1.0, &case.v);
    let (m, l) = angular_blocks(&cpd);
    let p = project_out(&m, &l);
    let h = p.ncols() / 2;
    (p.columns(0, h).into_owned(), p.columns(h, h).into_owned())
}

fn weighted_q(p1: &DMatrix<f64>, p2: &DMatrix<f64>, a: f64, b: f64) -> f64 {
    let h = p1.ncols();
    let mut m = DMatrix::zeros(p1.nrows(), 2 * h);
    m.columns_mut(0, h).copy_from(&(p1 * a));
    m.columns_mut(h, h).copy_from(&(p2 * b));
    q_value(&m).q
}

/// Both sides of the polar identity for
/// `J = ∫∫ q((I−MM†)[λL₁ μL₂]) e^{−‖λ𝒰+μ𝒱‖²/2}`: the 2-D quadrature with `q`
/// evaluated at every node, and
/// `2^{(2Σ−3)/2}Γ((2Σ−1)/2)∫q((I−MM†)[cL₁ sL₂])/‖c𝒰+s𝒱‖^{2Σ−1}dθ`.
pub fn angular_q_sides(case: &PolarCase, grid: usize) -> (f64, f64) {
    let (tu, tv) = (outer(&case.u), outer(&case.v));
    let sigma = case.shape.sigma() as f64;
    let (p1, p2) = projected_halves(case);
    let lhs = polar_double(&tu, &tv, sigma, grid, |rho, theta, nsq| {
        let (s, c) = theta.sin_cos();
        weighted_q(&p1, &p2, rho * c, rho * s) * (-0.5 * rho * rho * nsq).exp()
    });
    let k = 2.0 * sigma - 1.0;
    let rhs = 2f64.powf((k - 2.0) / 2.0)
        * gamma(k / 2.0)
        * integrate_angle(NODES_1D, |theta| {
            let (s, c) = theta.sin_cos();
            weighted_q(&p1, &p2, c, s) / mixed_norm_sq(&tu, &tv, theta).powf(k / 2.0)
        });
    (lhs, rhs)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// 2-D polar quadrature (`grid_size` nodes per axis) against the 1-D angular
/// right-hand sides, and against closed forms where available. Tolerance
/// `1e-6` relative; non-finite quadrature values fail with a diagnostic.
pub fn quad_check_polar_identities(grid_size: usize) -> OracleReport {
    let grid = grid_size.max(2);
    let cases = polar_identity_cases();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for case in &cases {
        let (l1, r1) = gaussian_moment_sides(case, grid);
        let mut devs = vec![rel(l1, r1)];
        if let Some(x) = case.exact {
            devs.push(rel(l1, x));
            devs.push(rel(r1, x));
        }
        let mut values = vec![l1, r1];
        if !case.degenerate_angular {
            let (l2, r2) = angular_q_sides(case, grid);
            devs.push(rel(l2, r2));
            values.extend([l2, r2]);
        }
        if values.iter().any(|v| !v.is_finite()) {
            notes.push(format!("{}: non-finite quadrature value", case.label));
            worst = f64::INFINITY;
            continue;
        }
        let d = devs.iter().copied().fold(0.0, f64::max);
        worst = worst.max(d);
        notes.push(format!("{}: {:.1e}", case.label, d));
    }
    OracleReport::new("quad_check_polar_identities", cases.len(), worst, 1e-6).with_detail(notes.join("; "))
}

/// `Π cos θ_k ≤ 1 − Σθ_k²/(7d)` on a uniform grid over `[0, π/2]^d` for
/// `d = 1..4`; at most 20 points per axis when `d ≥ 3`. Zero violations allowed.
pub fn check_cos_inequality(grid_size: usize) -> OracleReport {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for d in 1..=4usize {
        let g = if d >= 3 { grid_size.min(20) } else { grid_size }.max(2);
        let axis: Vec<f64> = (0..g).map(|i| FRAC_PI_2 * i as f64 / (g - 1) as f64).collect();
        let mut idx = vec![0usize; d];
        loop {
            let (mut prod, mut sq) = (1.0, 0.0);
            for &i in &idx {
                prod *= axis[i].cos();
                sq += axis[i] * axis[i];
            }
            worst = worst.max(prod - (1.0 - sq / (7.0 * d as f64)));
            points += 1;
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < g {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
    }
    OracleReport::new("check_cos_inequality", points, worst.max(0.0), 0.0)
}

/// Largest ratio between consecutive entries of `values`.
fn max_growth(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
}

/// `∫₀^{π/2} ‖cos θ·x − sin θ·y‖^{−a} dθ · ‖x − y‖^{a−1}` stays bounded as
/// `‖x − y‖` runs over [`SCALING_SWEEP`]: its growth between consecutive
/// sweep points is at most 1.5.
pub fn check_integral_bound_scaling<R: Rng + ?Sized>(a_values: &[f64], pair_count: usize, rng: &mut R) -> OracleReport {
    const DIM: usize = 4;
    let mut worst: f64 = 0.0;
    for &a in a_values {
        for _ in 0..pair_count {
            let x = random_unit_vector(DIM, rng);
            let w = random_tangent(&x, rng);
            let comp: Vec<f64> = SCALING_SWEEP
                .iter()
                .map(|&h| {
                    let y = along(&x, &w, h);
                    let integral = integrate_angle(NODES_1D, |t| {
                        let (s, c) = t.sin_cos();
                        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| c * p - s * q).collect();
                        norm(&z).powf(-a)
                    });
                    integral * dist(&x, &y).powf(a - 1.0)
                })
                .collect();
            worst = worst.max(max_growth(&comp));
        }
    }
    OracleReport::new(
        "check_integral_bound_scaling",
        a_values.len() * pair_count,
        worst,
        SCALING_RATIO_TOL,
    )
}

/// Exponents `s` used by [`check_integral_lower_scaling`].
pub const LOWER_SCALING_S: [f64; 4] = [1.0, 4.0, 6.0, 8.0];

/// `∫₀^{π/2} (cs)^{s−1}/‖cos θ·x + sin θ·y‖^{2s} dθ · ‖x + y‖^{2s−1}` stays
/// bounded below as `‖x + y‖` runs over [`SCALING_SWEEP`]: it shrinks by at
/// most a factor 1.5 between consecutive sweep points.
pub fn check_integral_lower_scaling<R: Rng + ?Sized>(pair_count: usize, rng: &mut R) -> OracleReport {
    const DIM: usize = 4;
    let mut worst: f64 = 0.0;
    for &sexp in &LOWER_SCALING_S {
        for _ in 0..pair_count {
            let x = random_unit_vector(DIM, rng);
            let w = random_tangent(&x, rng);
            let comp: Vec<f64> = SCALING_SWEEP
                .iter()
                .map(|&h| {
                    let y: Vec<f64> = along(&x, &w, h).iter().map(|p| -p).collect();
                    let integral = integrate_angle(NODES_1D, |t| {
                        let (s, c) = t.sin_cos();
                        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| c * p + s * q).collect();
                        (c * s).powf(sexp - 1.0) / norm(&z).powf(2.0 * sexp)
                    });
                    let sum: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p + q).collect();
                    integral * norm(&sum).powf(2.0 * sexp - 1.0)
                })
                .collect();
            let inverted: Vec<f64> = comp.iter().map(|c| 1.0 / c).collect();
            worst = worst.max(max_growth(&inverted));
        }
    }
    OracleReport::new(
        "check_integral_lower_scaling",
        LOWER_SCALING_S.len() * pair_count,
        worst,
        SCALING_RATIO_TOL,
    )
}

/// `q((I−MM†)[cos θ·L₁ sin θ·L₂]) / ‖𝒰 − 𝒱‖^{Σ−1}`, maximized over
/// `θ ∈ {π/8, π/4, 3π/8}`, stays bounded above as the factor distances shrink
/// along [`SCALING_SWEEP`]: its growth between consecutive points is at most 1.5.
pub fn check_q_upper_scaling<R: Rng + ?Sized>(pair_count: usize, rng: &mut R) -> OracleReport {
    let shapes: Vec<Shape> = [vec![2, 2, 2], vec![3, 3, 2], vec![3, 2, 2, 2]]
        .into_iter()
        .map(|d| Shape::new(d).expect("valid"))
        .collect();
    let thetas = [FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8];
    let mut worst: f64 = 0.0;
    for t in 0..pair_count * shapes.len() {
        let shape = &shapes[t % shapes.len()];
        let u: Vec<Vec<f64>> = shape.dims().iter().map(|&n| random_unit_vector(n, rng)).collect();
        let dirs: Vec<Vec<f64>> = u.iter().map(|uk| random_tangent(uk, rng)).collect();
        let rel_dist: Vec<f64> = (0..u.len())
            .map(|k| if k == 0 { 1.0 } else { rng.random_range(0.9..1.0) })
            .collect();
        let sigma = shape.sigma() as i32;
        let comp: Vec<f64> = SCALING_SWEEP
            .iter()
            .map(|&h| {
                let v: Vec<Vec<f64>> = (0..u.len()).map(|k| along(&u[k], &dirs[k], h * rel_dist[k])).collect();
                let case = PolarCase {
                    label: String::new(),
                    shape: shape.clone(),
                    u: u.clone(),
                    v: v.clone(),
                    exact: None,
                    degenerate_angular: false,
                };
                let (p1, p2) = projected_halves(&case);
                let q = thetas
                    .iter()
                    .map(|th| weighted_q(&p1, &p2, th.cos(), th.sin()))
                    .fold(0.0, f64::max);
                q / dist(&outer(&u), &outer(&v)).powi(sigma - 1)
            })
            .collect();
        worst = worst.max(max_growth(&comp));
    }
    OracleReport::new(
        "check_q_upper_scaling",
        pair_count * shapes.len(),
        worst,
        SCALING_RATIO_TOL,
    )
}
