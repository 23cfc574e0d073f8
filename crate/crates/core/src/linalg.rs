//! Dense real linear algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-14;

/// Singular values in descending order. Wide matrices are padded with zeros
/// up to the column count so that `min` reflects the nontrivial kernel.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.resize(m.ncols().max(s.len()), 0.0);
    s
}

/// Smallest singular value `min_v ‖Mv‖/‖v‖`; zero when `M` has more columns than rows.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Largest singular value.
pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `sqrt(det(MᵀM))`, the m-dimensional volume spanned by the columns.
pub fn vol(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().product()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QValue {
    /// Product of all singular values except the smallest.
    pub q: f64,
    /// Set when `ς_min ≤ 1e-14·ς_max`.
    pub near_singular: bool,
}

/// Product of all singular values except the smallest one.
pub fn q_value(m: &DMatrix<f64>) -> QValue {
    let s = singular_values(m);
    let Some((&smin, rest)) = s.split_last() else {
        return QValue {
            q: 1.0,
            near_singular: true,
        };
    };
    let smax = s[0];
    QValue {
        q: rest.iter().product(),
        near_singular: smin <= RANK_TOL * smax,
    }
}

/// Orthonormal basis of the column span of `m`, dropping directions whose
/// singular value is below `RANK_TOL` relative to the largest.
pub fn column_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_TOL * smax && smax > 0.0)
        .collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// `(I − MM†)L`: the columns of `L` with their component in `span(M)` removed.
pub fn project_out(m: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    let basis = column_space(m);
    let coeffs = basis.transpose() * l;
    l - basis * coeffs
}

/// `[A | B]`.
pub fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "row counts differ");
        out.columns_mut(c, b.ncols()).copy_from(b);
        c += b.ncols();
    }
    out
}
