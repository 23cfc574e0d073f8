//! Tangent spaces of the Segre manifold, Terracini matrices and Kruskal's
//! identifiability criterion.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{outer_into, CpDecomposition, Rank1Term, Shape};

/// An orthonormal `n × (n-1)` basis of `u^⊥` from the Householder reflector
/// that maps `u` to `∓e_1`.
pub fn orthonormal_complement(u: &[f64]) -> Result<DMatrix<f64>> {
    let n = u.len();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroFactor { mode: 0 });
    }
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitFactor { mode: 0, norm });
    }
    let s = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = u.to_vec();
    v[0] += s;
    let vtv: f64 = v.iter().map(|x| x * x).sum();
    Ok(DMatrix::from_fn(n, n - 1, |i, j| {
        let col = j + 1;
        let id = if i == col { 1.0 } else { 0.0 };
        id - 2.0 * v[i] * v[col] / vtv
    }))
}

/// Orthonormal basis `[𝒰 | L^1 | ... | L^d]` of the tangent space to the
/// Segre manifold at a rank-1 term.
#[derive(Clone, Debug)]
pub struct TangentBasis {
    pub columns: DMatrix<f64>,
}

impl TangentBasis {
    /// The unit rank-1 tensor `𝒰` (column 0).
    pub fn unit(&self) -> DMatrix<f64> {
        self.columns.columns(0, 1).into_owned()
    }

    /// The mode blocks `[L^1 | ... | L^d]` without the `𝒰` column.
    pub fn mode_blocks(&self) -> DMatrix<f64> {
        let c = self.columns.ncols();
        self.columns.columns(1, c - 1).into_owned()
    }
}

/// Builds the tangent basis of `term`. Only the factor directions are used.
pub fn tangent_basis(term: &Rank1Term) -> TangentBasis {
    let factors = term.factors();
    let shape = term.shape();
    let (sigma, pi) = (shape.sigma(), shape.pi());
    let mut columns = DMatrix::zeros(pi, sigma);
    let mut buf = vec![0.0; pi];

    let refs: Vec<&[f64]> = factors.iter().map(|f| f.as_slice()).collect();
    outer_into(&refs, &mut buf);
    columns.column_mut(0).copy_from_slice(&buf);

    let mut col = 1;
    for (k, u) in factors.iter().enumerate() {
        let comp = orthonormal_complement(u).expect("term factors are unit vectors");
        for j in 0..comp.ncols() {
            let dir: Vec<f64> = comp.column(j).iter().copied().collect();
            let mut slot = refs.clone();
            slot[k] = &dir;
            outer_into(&slot, &mut buf);
            columns.column_mut(col).copy_from_slice(&buf);
            col += 1;
        }
    }
    TangentBasis { columns }
}

/// `[U_1 | ... | U_r]`, one tangent basis per term in term order.
#[derive(Clone, Debug)]
pub struct TerraciniMatrix {
    pub shape: Shape,
    pub r: usize,
    pub columns: DMatrix<f64>,
}

impl TerraciniMatrix {
    /// The `Π × Σ` block of term `i`.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let sigma = self.shape.sigma();
        self.columns.columns(i * sigma, sigma).into_owned()
    }
}

pub fn terracini(cpd: &CpDecomposition) -> TerraciniMatrix {
    let bases: Vec<DMatrix<f64>> = cpd.terms().iter().map(|t| tangent_basis(t).columns).collect();
    let refs: Vec<&DMatrix<f64>> = bases.iter().collect();
    TerraciniMatrix {
        shape: cpd.shape().clone(),
        r: cpd.rank(),
        columns: linalg::hcat(&refs),
    }
}

/// Factor matrix of mode `k`: column `i` is the unit factor `u_i^k`.
pub fn factor_matrix(cpd: &CpDecomposition, k: usize) -> DMatrix<f64> {
    let n = cpd.shape().dims()[k];
    DMatrix::from_fn(n, cpd.rank(), |i, j| cpd.terms()[j].factors()[k][i])
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let s = linalg::singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > 1e-10 * smax).count()
}

/// Largest `k` such that every set of `k` columns is linearly independent.
///
/// Brute force over column subsets; fine for the small ranks used here.
pub fn k_rank(m: &DMatrix<f64>) -> usize {
    let r = m.ncols();
    let mut best = 0;
    'sizes: for k in 1..=r.min(m.nrows()) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let sub = DMatrix::from_fn(m.nrows(), k, |i, j| m[(i, idx[j])]);
            if numerical_rank(&sub) < k {
                break 'sizes;
            }
            // Next combination in lexicographic order.
            let mut p = k;
            while p > 0 && idx[p - 1] == r - k + p - 1 {
                p -= 1;
            }
            if p == 0 {
                break;
            }
            idx[p - 1] += 1;
            for q in p..k {
                idx[q] = idx[q - 1] + 1;
            }
        }
        best = k;
    }
    best
}

/// Kruskal's sufficient condition for identifiability of a third-order CPD:
/// `r ≤ (k_1 + k_2 + k_3 - 2)/2` with every `k_ℓ > 1`.
pub fn kruskal_certify(cpd: &CpDecomposition) -> Result<bool> {
    if cpd.shape().order() != 3 {
        return Err(Error::Unsupported(format!(
            "Kruskal's criterion needs order 3, got {}",
            cpd.shape().order()
        )));
    }
    let ks: Vec<usize> = (0..3).map(|k| k_rank(&factor_matrix(cpd, k))).collect();
    let r = cpd.rank();
    Ok(ks.iter().all(|&k| k > 1) && 2 * r + 2 <= ks.iter().sum::<usize>())
}
