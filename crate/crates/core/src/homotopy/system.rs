//! The square polynomial system `𝒜 = Σ_i a_i^(1) ⊗ [1; a_i^(2)] ⊗ ... ⊗ [1; a_i^(d)]`
//! in pinned coordinates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::{outer_into, CpDecomposition, DenseTensor, Rank1Term, Shape};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Unknowns of the decomposition system.
///
/// Per term `i` the layout is `a_i^(1)` (length `n_1`) followed by
/// `a_i^(k)` (length `n_k - 1`) for `k = 2..d`; terms are stored one after
/// another. The full factor of mode `k ≥ 2` is `[1; a_i^(k)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PinnedVariables {
    shape: Shape,
    r: usize,
    values: Vec<Complex64>,
}

impl PinnedVariables {
    pub fn new(shape: Shape, r: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != r * shape.sigma() {
            return Err(Error::InvalidArgument(format!(
                "expected {} pinned values, got {}",
                r * shape.sigma(),
                values.len()
            )));
        }
        Ok(PinnedVariables { shape, r, values })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Full (unpinned) factor vectors of term `i`.
    pub fn factors(&self, i: usize) -> Vec<Vec<Complex64>> {
        let dims = self.shape.dims();
        let mut pos = i * self.shape.sigma();
        let mut out = Vec::with_capacity(dims.len());
        out.push(self.values[pos..pos + dims[0]].to_vec());
        pos += dims[0];
        for &n in &dims[1..] {
            let mut f = Vec::with_capacity(n);
            f.push(C1);
            f.extend_from_slice(&self.values[pos..pos + n - 1]);
            pos += n - 1;
            out.push(f);
        }
        out
    }

    /// Euclidean norm of the imaginary parts.
    pub fn imag_norm(&self) -> f64 {
        self.values.iter().map(|z| z.im * z.im).sum::<f64>().sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Pinned coordinates of a real CPD. Fails if the leading coordinate of
    /// some factor in mode `k ≥ 2` vanishes.
    pub fn from_cpd(cpd: &CpDecomposition) -> Result<Self> {
        let shape = cpd.shape().clone();
        let mut values = Vec::with_capacity(cpd.rank() * shape.sigma());
        for term in cpd.terms() {
            let f = term.factors();
            let mut lead = term.scale();
            for (k, u) in f.iter().enumerate().skip(1) {
                if u[0].abs() < 1e-12 {
                    return Err(Error::Degenerate(format!("leading coordinate of mode {k} is zero")));
                }
                lead *= u[0];
            }
            values.extend(f[0].iter().map(|&x| Complex64::new(x * lead, 0.0)));
            for u in &f[1..] {
                values.extend(u[1..].iter().map(|&x| Complex64::new(x / u[0], 0.0)));
            }
        }
        PinnedVariables::new(shape, cpd.rank(), values)
    }
}

/// Sum of the norms of the rank-1 terms, the size of the cancellation floor
/// when evaluating the system.
pub fn term_scale(x: &PinnedVariables) -> f64 {
    (0..x.r)
        .map(|i| {
            x.factors(i)
                .iter()
                .map(|f| f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
                .product::<f64>()
        })
        .sum()
}

/// Vectorized `Σ_i a_i^(1) ⊗ [1; a_i^(2)] ⊗ ...` in row-major order.
pub fn evaluate(x: &PinnedVariables) -> Vec<Complex64> {
    let pi = x.shape.pi();
    let mut out = vec![C0; pi];
    let mut buf = vec![C0; pi];
    for i in 0..x.r {
        let factors = x.factors(i);
        let refs: Vec<&[Complex64]> = factors.iter().map(|f| f.as_slice()).collect();
        outer_into(&refs, &mut buf);
        out.iter_mut().zip(&buf).for_each(|(o, b)| *o += b);
    }
    out
}

/// `target − evaluate(x)`.
pub fn residual(x: &PinnedVariables, target: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(target.len(), x.shape.pi(), "target has wrong length");
    let mut r = evaluate(x);
    r.iter_mut().zip(target).for_each(|(ri, t)| *ri = t - *ri);
    r
}

/// Real tensor as a complex vector.
pub fn complexify(t: &DenseTensor) -> Vec<Complex64> {
    t.values().iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// `∂ evaluate / ∂ x`, a `Π × rΣ` matrix with columns ordered like the unknowns.
pub fn jacobian(x: &PinnedVariables) -> DMatrix<Complex64> {
    let mut j = DMatrix::from_element(x.shape.pi(), x.len(), C0);
    jacobian_into(x, &mut j);
    j
}

pub(crate) fn jacobian_into(x: &PinnedVariables, j: &mut DMatrix<Complex64>) {
    let dims = x.shape.dims();
    let pi = x.shape.pi();
    let mut buf = vec![C0; pi];
    let mut col = 0;
    for i in 0..x.r {
        let factors = x.factors(i);
        for (k, &n) in dims.iter().enumerate() {
            let offset = usize::from(k > 0);
            for jj in offset..n {
                let mut unit = vec![C0; n];
                unit[jj] = C1;
                let mut refs: Vec<&[Complex64]> = factors.iter().map(|f| f.as_slice()).collect();
                refs[k] = &unit;
                outer_into(&refs, &mut buf);
                j.column_mut(col).copy_from_slice(&buf);
                col += 1;
            }
        }
    }
}

/// Draws a random start pair: Gaussian factors converted to pinned form and
/// the tensor they evaluate to.
///
/// A factor whose leading coordinate has magnitude below `1e-8` is redrawn.
pub fn build_start<R: Rng + ?Sized>(shape: &Shape, r: usize, rng: &mut R) -> Result<(DenseTensor, PinnedVariables)> {
    if !shape.is_perfect(r) {
        return Err(Error::NotPerfect {
            r_sigma: r * shape.sigma(),
            pi: shape.pi(),
        });
    }
    let dims = shape.dims();
    let mut values = Vec::with_capacity(r * shape.sigma());
    for _ in 0..r {
        let first: Vec<f64> = (0..dims[0]).map(|_| rng.sample(StandardNormal)).collect();
        let mut lead = 1.0;
        let mut tails = Vec::new();
        for &n in &dims[1..] {
            let v: Vec<f64> = loop {
                let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                if v[0].abs() >= 1e-8 {
                    break v;
                }
            };
            lead *= v[0];
            tails.extend(v[1..].iter().map(|x| x / v[0]));
        }
        values.extend(first.iter().map(|&x| Complex64::new(x * lead, 0.0)));
        values.extend(tails.into_iter().map(|x| Complex64::new(x, 0.0)));
    }
    let x = PinnedVariables::new(shape.clone(), r, values)?;
    let t = evaluate(&x).into_iter().map(|z| z.re).collect();
    Ok((DenseTensor::new(shape.clone(), t)?, x))
}

/// Whether the Euclidean norm of all imaginary parts is below `tol`.
pub fn classify_real(x: &PinnedVariables, tol: f64) -> bool {
    x.imag_norm() < tol
}

/// Drops imaginary parts, restores the pinned coordinates and normalizes
/// every factor, collecting magnitudes into the scales.
pub fn to_cpd(x: &PinnedVariables) -> Result<CpDecomposition> {
    let terms = (0..x.r)
        .map(|i| {
            let vectors: Vec<Vec<f64>> = x
                .factors(i)
                .into_iter()
                .map(|f| f.into_iter().map(|z| z.re).collect())
                .collect();
            Rank1Term::from_vectors(vectors).map_err(|e| Error::Degenerate(format!("term {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    CpDecomposition::new(x.shape.clone(), terms)
}
