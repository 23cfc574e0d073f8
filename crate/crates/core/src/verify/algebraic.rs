//! Oracles for exact matrix identities and explicit inequalities.

use nalgebra::DMatrix;
use rand::Rng;

use super::{dist, dot, oracle_shapes, outer, rank2, sample_d_epsilon, OracleReport};
use crate::condition::{angular_blocks, jacobian_matrix_rank2, jacobian_rank2};
use crate::linalg::{hcat, project_out, q_value, vol};
use crate::segre::terracini;
use crate::tensor::{random_unit_vector, Shape};

/// ε values tried by [`check_q_lower_bound`] in addition to the requested one.
pub const Q_BOUND_EPSILONS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

fn random_tuple<R: Rng + ?Sized>(shape: &Shape, rng: &mut R) -> Vec<Vec<f64>> {
    shape.dims().iter().map(|&n| random_unit_vector(n, rng)).collect()
}

/// Log-uniform on `(0.1, 10)`.
fn random_weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    10f64.powf(rng.random_range(-1.0..1.0))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// `vol(Q) = vol(M)·vol((I − MM†)L)` with `Q = [L M]`, on random rank-2
/// configurations. Tolerance `1e-9` relative.
pub fn check_vol_factorization<R: Rng + ?Sized>(trials: usize, rng: &mut R) -> OracleReport {
    let shapes = oracle_shapes();
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let shape = &shapes[t % shapes.len()];
        let (u, v) = (random_tuple(shape, rng), random_tuple(shape, rng));
        let cpd = rank2(shape, random_weight(rng), &u, random_weight(rng), &v);
        let (m, l) = angular_blocks(&cpd);
        let full = vol(&hcat(&[&l, &m]));
        let split = vol(&m) * vol(&project_out(&m, &l));
        worst = worst.max(relative(full, split));
    }
    OracleReport::new("check_vol_factorization", trials, worst, 1e-9)
}

/// `vol([λL₁ μL₂ 𝒰 𝒱]) = λ^{Σ−1} μ^{Σ−1} vol(U)` for `λ, μ ∈ (0.1, 10)`.
/// Tolerance `1e-9` relative.
pub fn check_jacobian_factorization<R: Rng + ?Sized>(trials: usize, rng: &mut R) -> OracleReport {
    let shapes = oracle_shapes();
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let shape = &shapes[t % shapes.len()];
        let (u, v) = (random_tuple(shape, rng), random_tuple(shape, rng));
        let cpd = rank2(shape, random_weight(rng), &u, random_weight(rng), &v);
        let direct = vol(&jacobian_matrix_rank2(&cpd).expect("rank 2"));
        let factored = jacobian_rank2(&cpd).expect("rank 2");
        worst = worst.max(relative(direct, factored));
    }
    OracleReport::new("check_jacobian_factorization", trials, worst, 1e-9)
}

/// Tangent complements of one mode in the rotated frame: `u̇₂` is the unit
/// vector in `span{u, v}` orthogonal to `u` closest to `v`, `v̇₂` its image
/// under the plane rotation taking `u` to `v`, and the remaining columns are a
/// shared orthonormal basis of the plane's complement.
fn rotated_complements(u: &[f64], v: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = u.len();
    let delta = dot(u, v);
    let mut u2: Vec<f64> = v.iter().zip(u).map(|(b, a)| b - delta * a).collect();
    // second Gram–Schmidt pass: for v close to u the first one loses digits
    for _ in 0..2 {
        let c = dot(&u2, u);
        u2.iter_mut().zip(u).for_each(|(b, a)| *b -= c * a);
        let n = super::norm(&u2);
        u2.iter_mut().for_each(|a| *a /= n);
    }
    let s = dot(&u2, v);
    let v2: Vec<f64> = u.iter().zip(&u2).map(|(a, b)| -s * a + delta * b).collect();

    let mut stacked = DMatrix::<f64>::zeros(n, n + 2);
    stacked.column_mut(0).copy_from_slice(u);
    stacked.column_mut(1).copy_from_slice(&u2);
    for j in 0..n {
        stacked[(j, j + 2)] = 1.0;
    }
    let q = stacked.qr().q();

    let mut du = DMatrix::zeros(n, n - 1);
    let mut dv = DMatrix::zeros(n, n - 1);
    du.column_mut(0).copy_from_slice(&u2);
    dv.column_mut(0).copy_from_slice(&v2);
    for j in 2..n {
        du.column_mut(j - 1).copy_from(&q.column(j));
        dv.column_mut(j - 1).copy_from(&q.column(j));
    }
    (du, dv)
}

/// `[L^1 … L^d]` built from the given per-mode complements.
fn mode_blocks(factors: &[Vec<f64>], comps: &[DMatrix<f64>]) -> DMatrix<f64> {
    let pi: usize = factors.iter().map(|f| f.len()).product();
    let cols: usize = comps.iter().map(|c| c.ncols()).sum();
    let mut out = DMatrix::zeros(pi, cols);
    let mut col = 0;
    for (k, comp) in comps.iter().enumerate() {
        for j in 0..comp.ncols() {
            let mut slot = factors.to_vec();
            slot[k] = comp.column(j).iter().copied().collect();
            out.column_mut(col).copy_from_slice(&outer(&slot));
            col += 1;
        }
    }
    out
}

/// Gram matrix of `[𝒂_↓, R_↓, 𝒂_↑, R_↑]` in the rotated frame.
pub(crate) fn rotated_gram(u: &[Vec<f64>], v: &[Vec<f64>]) -> DMatrix<f64> {
    let (cu, cv): (Vec<_>, Vec<_>) = u.iter().zip(v).map(|(a, b)| rotated_complements(a, b)).unzip();
    let l1 = mode_blocks(u, &cu);
    let l2 = mode_blocks(v, &cv);
    let (tu, tv) = (outer(u), outer(v));
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let pi = tu.len();
    let a_down = DMatrix::from_iterator(pi, 1, tu.iter().zip(&tv).map(|(a, b)| r * (a + b)));
    let a_up = DMatrix::from_iterator(pi, 1, tu.iter().zip(&tv).map(|(a, b)| r * (a - b)));
    let r_down = (&l1 - &l2) * r;
    let r_up = (&l1 + &l2) * r;
    let n = hcat(&[&a_down, &r_down, &a_up, &r_up]);
    n.transpose() * n
}

/// Closed form of [`rotated_gram`] in terms of `δ_k = ⟨u^k, v^k⟩`,
/// `ε_k = tan arccos δ_k` and `z = Π δ_k`, all derived from the chord
/// lengths `‖u^k − v^k‖` to avoid cancellation in `1 − δ_k`.
pub(crate) fn gram_closed_form(dims: &[usize], chords: &[f64]) -> DMatrix<f64> {
    let deltas: Vec<f64> = chords.iter().map(|c| 1.0 - 0.5 * c * c).collect();
    let eps: Vec<f64> = chords
        .iter()
        .zip(&deltas)
        .map(|(c, d)| c * (1.0 - 0.25 * c * c).sqrt() / d)
        .collect();
    let z: f64 = deltas.iter().product();
    let sigma = 1 + dims.iter().map(|n| n - 1).sum::<usize>();
    let m = sigma - 1;
    let mut f = vec![0.0; m];
    let mut dd = vec![0.0; m];
    let mut off = 0;
    for (k, &n) in dims.iter().enumerate() {
        f[off] = eps[k];
        dd[off] = z * (1.0 + eps[k] * eps[k]);
        for j in 1..n - 1 {
            dd[off + j] = z / deltas[k];
        }
        off += n - 1;
    }
    let mut g = DMatrix::zeros(2 * sigma, 2 * sigma);
    let up = sigma;
    g[(0, 0)] = 1.0 + z;
    g[(up, up)] = 1.0 - z;
    for i in 0..m {
        g[(0, 1 + i)] = z * f[i];
        g[(1 + i, 0)] = z * f[i];
        g[(up, up + 1 + i)] = -z * f[i];
        g[(up + 1 + i, up)] = -z * f[i];
        for j in 0..m {
            let diag = if i == j { 1.0 } else { 0.0 };
            g[(1 + i, 1 + j)] = diag * (1.0 - dd[i]) + z * f[i] * f[j];
            g[(up + 1 + i, up + 1 + j)] = diag * (1.0 + dd[i]) - z * f[i] * f[j];
        }
    }
    g
}

/// Entrywise agreement of the rotated-frame Gram matrix with its closed
/// form on `D(ε)` samples. Tolerance `1e-12` absolute.
pub fn check_gram_blocks<R: Rng + ?Sized>(trials: usize, rng: &mut R, epsilon: f64) -> OracleReport {
    let shapes = oracle_shapes();
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let shape = &shapes[t % shapes.len()];
        let (u, v) = sample_d_epsilon(shape, epsilon, rng);
        let chords: Vec<f64> = u.iter().zip(&v).map(|(a, b)| dist(a, b)).collect();
        let g = rotated_gram(&u, &v);
        let expected = gram_closed_form(shape.dims(), &chords);
        worst = worst.max((g - expected).abs().max());
    }
    OracleReport::new("check_gram_blocks", trials, worst, 1e-12)
}

/// `‖u¹−v¹‖ ≤ ‖𝒰−𝒱‖ ≤ d·‖u¹−v¹‖` on `D(ε)`, zero violations allowed.
pub fn check_norm_sandwich<R: Rng + ?Sized>(trials: usize, rng: &mut R, epsilon: f64) -> OracleReport {
    let shapes = oracle_shapes();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for t in 0..trials {
        let shape = &shapes[t % shapes.len()];
        let (u, v) = sample_d_epsilon(shape, epsilon, rng);
        let lo = dist(&u[0], &v[0]);
        let mid = dist(&outer(&u), &outer(&v));
        let hi = shape.order() as f64 * lo;
        let viol = (lo - mid).max(mid - hi).max(0.0);
        if viol > 0.0 {
            count += 1;
        }
        worst = worst.max(viol);
    }
    OracleReport::new("check_norm_sandwich", trials, worst, 0.0).with_detail(format!("violations={count}"))
}

/// `2^{−2d} (‖u¹−v¹‖/2)^{Σ−1}`.
pub fn q_lower_bound(shape: &Shape, d1: f64) -> f64 {
    2f64.powi(-2 * shape.order() as i32) * (0.5 * d1).powi(shape.sigma() as i32 - 1)
}

/// Largest relative shortfall `(bound − q(U))/bound` and the number of
/// violations over `trials` samples of `D(ε)`.
fn q_bound_sweep<R: Rng + ?Sized>(trials: usize, rng: &mut R, epsilon: f64) -> (f64, usize) {
    let shapes = oracle_shapes();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for t in 0..trials {
        let shape = &shapes[t % shapes.len()];
        let (u, v) = sample_d_epsilon(shape, epsilon, rng);
        let q = q_value(&terracini(&rank2(shape, 1.0, &u, 1.0, &v)).columns).q;
        let bound = q_lower_bound(shape, dist(&u[0], &v[0]));
        let shortfall = ((bound - q) / bound).max(0.0);
        if shortfall > 0.0 {
            count += 1;
        }
        worst = worst.max(shortfall);
    }
    (worst, count)
}

/// `q(U) ≥ 2^{−2d}(‖u¹−v¹‖/2)^{Σ−1}` on `D(ε)`, zero violations allowed.
/// The sweep over [`Q_BOUND_EPSILONS`] is reported in the detail, together
/// with the largest ε from which the bound held at every smaller tested ε.
pub fn check_q_lower_bound<R: Rng + ?Sized>(trials: usize, rng: &mut R, epsilon: f64) -> OracleReport {
    let (worst, count) = q_bound_sweep(trials, rng, epsilon);
    let mut eps: Vec<f64> = Q_BOUND_EPSILONS.to_vec();
    eps.retain(|&e| e != epsilon);
    eps.push(epsilon);
    eps.sort_by(|a, b| b.total_cmp(a));
    let counts: Vec<(f64, usize)> = eps
        .iter()
        .map(|&e| {
            (
                e,
                if e == epsilon {
                    count
                } else {
                    q_bound_sweep(trials, rng, e).1
                },
            )
        })
        .collect();
    let held_from = counts.iter().rev().take_while(|c| c.1 == 0).last().map(|c| c.0);
    let sweep: Vec<String> = counts.iter().map(|(e, c)| format!("eps={e}:{c}")).collect();
    let held = held_from.map_or("none".to_string(), |e| e.to_string());
    OracleReport::new("check_q_lower_bound", trials, worst, 0.0).with_detail(format!(
        "violations [{}]; holds for all tested eps <= {held}",
        sweep.join(" ")
    ))
}
