#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use cpd_condition::tensor::{CpDecomposition, DenseTensor, Rank1Term, Shape};

pub fn shape(dims: &[usize]) -> Shape {
    Shape::new(dims.to_vec()).unwrap()
}

/// Cayley's hyperdeterminant of a 2x2x2 tensor. A generic real tensor has
/// real rank 2 iff it is positive.
pub fn hyperdeterminant(t: &DenseTensor) -> f64 {
    let a = |i: usize, j: usize, k: usize| t.get(&[i, j, k]);
    let (a000, a001, a010, a011) = (a(0, 0, 0), a(0, 0, 1), a(0, 1, 0), a(0, 1, 1));
    let (a100, a101, a110, a111) = (a(1, 0, 0), a(1, 0, 1), a(1, 1, 0), a(1, 1, 1));
    let squares = (a000 * a111).powi(2) + (a001 * a110).powi(2) + (a010 * a101).powi(2) + (a100 * a011).powi(2);
    let pairs = a000 * a001 * a110 * a111
        + a000 * a010 * a101 * a111
        + a000 * a100 * a011 * a111
        + a001 * a010 * a101 * a110
        + a001 * a100 * a011 * a110
        + a010 * a100 * a011 * a101;
    let quads = a000 * a011 * a101 * a110 + a001 * a010 * a100 * a111;
    squares - 2.0 * pairs + 4.0 * quads
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix with the signs of `diag(R)` fixed.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Applies `Q_k` to every mode-`k` factor.
pub fn transform_modes(cpd: &CpDecomposition, qs: &[DMatrix<f64>]) -> CpDecomposition {
    let terms = cpd
        .terms()
        .iter()
        .map(|t| {
            let factors = t
                .factors()
                .iter()
                .zip(qs)
                .map(|(f, q)| (q * nalgebra::DVector::from_column_slice(f)).as_slice().to_vec())
                .collect();
            Rank1Term::new(t.scale(), factors).unwrap()
        })
        .collect();
    CpDecomposition::new(cpd.shape().clone(), terms).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
