//! Dense real tensors and rank-1 structure.
//!
//! Tensors are stored flat in row-major order (last index fastest). The same
//! flattening is used everywhere a tensor is turned into a vector: Terracini
//! matrices, homotopy residuals and the serialized forms.
//!
//! Two stable serializations are provided for [`DenseTensor`]:
//!
//! * JSON: `{"dims": [n1, ..., nd], "values": [v0, v1, ...]}`.
//! * Binary: `u64` order `d`, then `d` × `u64` dims, then `Π` × `f64`
//!   values, all little-endian.

use std::fmt;
use std::ops::{AddAssign, Mul};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-norm tolerance for factor vectors of a [`Rank1Term`].
pub const UNIT_TOL: f64 = 1e-12;
/// Factors within this distance of unit norm are renormalized instead of rejected.
pub const RENORMALIZE_TOL: f64 = 1e-6;

/// Dimensions `n_1 × ... × n_d` of a tensor space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    /// Requires `d >= 2` and every `n_k >= 2`.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidShape(format!(
                "order must be at least 2, got {}",
                dims.len()
            )));
        }
        if let Some(n) = dims.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidShape(format!(
                "every dimension must be at least 2, got {n}"
            )));
        }
        Ok(Shape { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Dimension of the Segre manifold, `1 + Σ (n_k - 1)`.
    pub fn sigma(&self) -> usize {
        1 + self.dims.iter().map(|n| n - 1).sum::<usize>()
    }

    /// Dimension of the ambient space, `Π n_k`.
    pub fn pi(&self) -> usize {
        self.dims.iter().product()
    }

    /// Whether rank `r` makes the decomposition system square (`r Σ = Π`).
    pub fn is_perfect(&self, r: usize) -> bool {
        r * self.sigma() == self.pi()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index.iter().zip(&self.dims).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            index[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
        index
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.dims
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

impl FromStr for Shape {
    type Err = Error;
    /// Parses `AxBxC...`.
    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(['x', 'X'])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidShape(format!("cannot parse {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Shape::new(dims)
    }
}

/// `(Σ, Π)` for a shape.
pub fn shape_constants(shape: &Shape) -> (usize, usize) {
    (shape.sigma(), shape.pi())
}

/// Row-major outer product of `vectors`, written into `out`.
///
/// `out.len()` must equal the product of the vector lengths.
pub fn outer_into<T>(vectors: &[&[T]], out: &mut [T])
where
    T: Copy + Mul<Output = T>,
{
    let total: usize = vectors.iter().map(|v| v.len()).product();
    assert_eq!(out.len(), total, "output buffer has wrong length");
    // Build the product in place, expanding one mode at a time from the front.
    // After mode k the first `len` entries hold u^1 ⊗ ... ⊗ u^k.
    let first = vectors[0];
    out[..first.len()].copy_from_slice(first);
    let mut len = first.len();
    for v in &vectors[1..] {
        let n = v.len();
        for i in (0..len).rev() {
            let a = out[i];
            for (j, &b) in v.iter().enumerate() {
                out[i * n + j] = a * b;
            }
        }
        len *= n;
    }
}

/// Adds `scale * (u^1 ⊗ ... ⊗ u^d)` into `out` without allocating the product.
pub(crate) fn add_outer_into<T>(scale: T, vectors: &[&[T]], out: &mut [T], scratch: &mut Vec<T>)
where
    T: Copy + Mul<Output = T> + AddAssign,
{
    scratch.clear();
    scratch.resize(out.len(), scale);
    outer_into(vectors, scratch);
    for (o, &s) in out.iter_mut().zip(scratch.iter()) {
        *o += scale * s;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A real tensor stored flat in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<TensorRepr> for DenseTensor {
    type Error = Error;
    fn try_from(repr: TensorRepr) -> Result<Self> {
        DenseTensor::new(Shape::new(repr.dims)?, repr.values)
    }
}

impl From<DenseTensor> for TensorRepr {
    fn from(t: DenseTensor) -> Self {
        TensorRepr {
            dims: t.shape.dims,
            values: t.values,
        }
    }
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.pi() {
            return Err(Error::InvalidArgument(format!(
                "shape {shape} needs {} values, got {}",
                shape.pi(),
                values.len()
            )));
        }
        Ok(DenseTensor { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        let values = vec![0.0; shape.pi()];
        DenseTensor { shape, values }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.shape.flat_index(index)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.check_shape(other)?;
        Ok(dot(&self.values, &other.values))
    }

    /// `self - other`.
    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            values,
        })
    }

    pub fn scaled(&self, s: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    fn check_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.shape.order();
        let mut out = Vec::with_capacity(8 * (1 + d + self.values.len()));
        out.extend_from_slice(&(d as u64).to_le_bytes());
        for &n in self.shape.dims() {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut words = bytes.chunks_exact(8);
        if !bytes.len().is_multiple_of(8) {
            return Err(Error::Parse("binary tensor length is not a multiple of 8".into()));
        }
        let mut next_u64 = || -> Result<u64> {
            let w = words
                .next()
                .ok_or_else(|| Error::Parse("truncated binary tensor".into()))?;
            Ok(u64::from_le_bytes(w.try_into().expect("8-byte chunk")))
        };
        let d = next_u64()? as usize;
        if d > 64 {
            return Err(Error::Parse(format!("implausible tensor order {d}")));
        }
        let dims = (0..d)
            .map(|_| next_u64().map(|n| n as usize))
            .collect::<Result<Vec<_>>>()?;
        let shape = Shape::new(dims)?;
        let body = &bytes[8 * (1 + d)..];
        if body.len() != 8 * shape.pi() {
            return Err(Error::Parse(format!(
                "expected {} values, found {} bytes",
                shape.pi(),
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|w| f64::from_le_bytes(w.try_into().expect("8-byte chunk")))
            .collect();
        DenseTensor::new(shape, values)
    }
}

/// Dense outer product `u^1 ⊗ ... ⊗ u^d`.
pub fn outer_product(vectors: &[Vec<f64>]) -> Result<DenseTensor> {
    for (mode, v) in vectors.iter().enumerate() {
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroFactor { mode });
        }
    }
    let shape = Shape::new(vectors.iter().map(|v| v.len()).collect())?;
    let mut values = vec![0.0; shape.pi()];
    let refs: Vec<&[f64]> = vectors.iter().map(|v| v.as_slice()).collect();
    outer_into(&refs, &mut values);
    Ok(DenseTensor { shape, values })
}

/// One summand `λ u^1 ⊗ ... ⊗ u^d` of a CPD with `λ > 0` and unit factors.
///
/// Sign convention: the first nonzero coordinate of every factor after the
/// first is positive; any sign is carried by factor 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TermRepr", into = "TermRepr")]
pub struct Rank1Term {
    scale: f64,
    factors: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    scale: f64,
    factors: Vec<Vec<f64>>,
}

impl TryFrom<TermRepr> for Rank1Term {
    type Error = Error;
    fn try_from(repr: TermRepr) -> Result<Self> {
        Rank1Term::new(repr.scale, repr.factors)
    }
}

impl From<Rank1Term> for TermRepr {
    fn from(t: Rank1Term) -> Self {
        TermRepr {
            scale: t.scale,
            factors: t.factors,
        }
    }
}

impl Rank1Term {
    /// Builds a term from a scale and (nearly) unit factors.
    ///
    /// Factors within [`RENORMALIZE_TOL`] of unit norm are renormalized; a
    /// negative scale is folded into factor 1.
    pub fn new(scale: f64, mut factors: Vec<Vec<f64>>) -> Result<Self> {
        if !(scale.is_finite() && scale != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rank-1 scale must be finite and nonzero, got {scale}"
            )));
        }
        Shape::new(factors.iter().map(|f| f.len()).collect())?;
        for (mode, f) in factors.iter_mut().enumerate() {
            let n = norm(f);
            if n == 0.0 {
                return Err(Error::ZeroFactor { mode });
            }
            if (n - 1.0).abs() > RENORMALIZE_TOL {
                return Err(Error::NonUnitFactor { mode, norm: n });
            }
            if (n - 1.0).abs() > UNIT_TOL {
                f.iter_mut().for_each(|x| *x /= n);
            }
        }
        let mut term = Rank1Term { scale, factors };
        term.canonicalize_signs();
        Ok(term)
    }

    /// Builds `v^1 ⊗ ... ⊗ v^d` from arbitrary nonzero vectors: every factor
    /// is normalized and the norms are collected into the scale.
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        Shape::new(vectors.iter().map(|v| v.len()).collect())?;
        let mut scale = 1.0;
        let mut factors = Vec::with_capacity(vectors.len());
        for (mode, mut v) in vectors.into_iter().enumerate() {
            let n = norm(&v);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::ZeroFactor { mode });
            }
            v.iter_mut().for_each(|x| *x /= n);
            scale *= n;
            factors.push(v);
        }
        let mut term = Rank1Term { scale, factors };
        term.canonicalize_signs();
        Ok(term)
    }

    fn canonicalize_signs(&mut self) {
        if self.scale < 0.0 {
            self.scale = -self.scale;
            self.factors[0].iter_mut().for_each(|x| *x = -*x);
        }
        for k in 1..self.factors.len() {
            let flip = self.factors[k].iter().find(|&&x| x != 0.0).is_some_and(|&x| x < 0.0);
            if flip {
                self.factors[k].iter_mut().for_each(|x| *x = -*x);
                self.factors[0].iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.factors.iter().map(|f| f.len()).collect()).expect("validated at construction")
    }

    /// Same factors, different positive scale.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rank-1 scale must be finite and positive, got {scale}"
            )));
        }
        Ok(Rank1Term {
            scale,
            factors: self.factors.clone(),
        })
    }

    /// The unit rank-1 tensor `u^1 ⊗ ... ⊗ u^d`, flattened.
    pub fn unit_vector(&self) -> Vec<f64> {
        let pi = self.factors.iter().map(|f| f.len()).product();
        let mut out = vec![0.0; pi];
        let refs: Vec<&[f64]> = self.factors.iter().map(|f| f.as_slice()).collect();
        outer_into(&refs, &mut out);
        out
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut values = self.unit_vector();
        values.iter_mut().for_each(|x| *x *= self.scale);
        DenseTensor {
            shape: self.shape(),
            values,
        }
    }
}

/// `⟨s, t⟩` computed factor-wise as `λ_s λ_t Π_k ⟨u_s^k, u_t^k⟩`.
pub fn rank1_inner(s: &Rank1Term, t: &Rank1Term) -> Result<f64> {
    let (ss, ts) = (s.shape(), t.shape());
    if ss != ts {
        return Err(Error::ShapeMismatch { left: ss, right: ts });
    }
    Ok(s.factors
        .iter()
        .zip(&t.factors)
        .fold(s.scale * t.scale, |acc, (u, v)| acc * dot(u, v)))
}

/// An ordered list of `r >= 1` rank-1 terms over a common shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CpdRepr", into = "CpdRepr")]
pub struct CpDecomposition {
    shape: Shape,
    terms: Vec<Rank1Term>,
}

#[derive(Serialize, Deserialize)]
struct CpdRepr {
    dims: Vec<usize>,
    terms: Vec<Rank1Term>,
}

impl TryFrom<CpdRepr> for CpDecomposition {
    type Error = Error;
    fn try_from(repr: CpdRepr) -> Result<Self> {
        CpDecomposition::new(Shape::new(repr.dims)?, repr.terms)
    }
}

impl From<CpDecomposition> for CpdRepr {
    fn from(c: CpDecomposition) -> Self {
        CpdRepr {
            dims: c.shape.dims,
            terms: c.terms,
        }
    }
}

impl CpDecomposition {
    pub fn new(shape: Shape, terms: Vec<Rank1Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("a CPD needs at least one term".into()));
        }
        for t in &terms {
            let ts = t.shape();
            if ts != shape {
                return Err(Error::ShapeMismatch { left: shape, right: ts });
            }
        }
        Ok(CpDecomposition { shape, terms })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn terms(&self) -> &[Rank1Term] {
        &self.terms
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    /// Multiplies every scale by `t > 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|term| term.with_scale(term.scale * t))
            .collect::<Result<Vec<_>>>()?;
        CpDecomposition::new(self.shape.clone(), terms)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Dense evaluation `Σ_i λ_i u_i^1 ⊗ ... ⊗ u_i^d`.
pub fn cpd_eval(cpd: &CpDecomposition) -> DenseTensor {
    let mut values = vec![0.0; cpd.shape.pi()];
    let mut scratch = Vec::new();
    for term in &cpd.terms {
        let refs: Vec<&[f64]> = term.factors.iter().map(|f| f.as_slice()).collect();
        add_outer_into(term.scale, &refs, &mut values, &mut scratch);
    }
    DenseTensor {
        shape: cpd.shape.clone(),
        values,
    }
}

/// Tensor with i.i.d. standard normal entries.
pub fn random_gaussian_tensor<R: Rng + ?Sized>(shape: &Shape, rng: &mut R) -> DenseTensor {
    let values = (0..shape.pi()).map(|_| rng.sample(StandardNormal)).collect();
    DenseTensor {
        shape: shape.clone(),
        values,
    }
}

/// Standard normal vector of length `n`.
pub fn random_gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniformly distributed point on the unit sphere in `R^n`.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v = random_gaussian_vector(n, rng);
        let nv = norm(&v);
        if nv > 1e-300 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

/// CPD whose factor vectors are i.i.d. standard normal before normalization;
/// each scale is the product of the drawn norms.
pub fn random_cpd<R: Rng + ?Sized>(shape: &Shape, r: usize, rng: &mut R) -> Result<CpDecomposition> {
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let terms = (0..r)
        .map(|_| {
            let vectors = shape.dims().iter().map(|&n| random_gaussian_vector(n, rng)).collect();
            Rank1Term::from_vectors(vectors)
        })
        .collect::<Result<Vec<_>>>()?;
    CpDecomposition::new(shape.clone(), terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn shape_constants_match_known_spaces() {
        assert_eq!(shape_constants(&Shape::new(vec![2, 2, 2]).unwrap()), (4, 8));
        assert_eq!(shape_constants(&Shape::new(vec![5, 4, 3]).unwrap()), (10, 60));
        assert!(Shape::new(vec![5]).is_err());
        assert!(Shape::new(vec![3, 1, 2]).is_err());
        assert!(Shape::new(vec![5, 4, 3]).unwrap().is_perfect(6));
    }

    #[test]
    fn shape_parse_and_display() {
        let s: Shape = "3x3x2".parse().unwrap();
        assert_eq!(s.dims(), &[3, 3, 2]);
        assert_eq!(s.to_string(), "3x3x2");
        assert!("3xx2".parse::<Shape>().is_err());
        assert!("4".parse::<Shape>().is_err());
    }

    #[test]
    fn flat_index_roundtrip_is_row_major() {
        let s = Shape::new(vec![2, 3, 4]).unwrap();
        assert_eq!(s.flat_index(&[0, 0, 1]), 1);
        assert_eq!(s.flat_index(&[0, 1, 0]), 4);
        assert_eq!(s.flat_index(&[1, 0, 0]), 12);
        for f in 0..s.pi() {
            assert_eq!(s.flat_index(&s.multi_index(f)), f);
        }
        assert_eq!(s.strides(), vec![12, 4, 1]);
    }

    #[test]
    fn outer_product_of_basis_vectors_is_indicator() {
        let t = outer_product(&[e(2, 0), e(2, 0), e(2, 0)]).unwrap();
        assert_eq!(t.get(&[0, 0, 0]), 1.0);
        assert_eq!(t.values().iter().filter(|&&x| x != 0.0).count(), 1);

        let t = outer_product(&[vec![2.0, 0.0], e(2, 1)]).unwrap();
        assert_eq!(t.frobenius_norm(), 2.0);

        assert!(matches!(
            outer_product(&[e(2, 0), vec![0.0, 0.0]]),
            Err(Error::ZeroFactor { mode: 1 })
        ));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn outer_product_entries_and_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unit_vector(3, &mut rng);
        let v = random_unit_vector(4, &mut rng);
        let w = random_unit_vector(2, &mut rng);
        let t = outer_product(&[u.clone(), v.clone(), w.clone()]).unwrap();
        assert!((t.frobenius_norm() - 1.0).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..2 {
                    assert_eq!(t.get(&[i, j, k]), u[i] * v[j] * w[k]);
                }
            }
        }
    }

    #[test]
    fn rank1_inner_agrees_with_dense() {
        let s = Rank1Term::new(1.0, vec![e(2, 0), e(2, 1), e(2, 0)]).unwrap();
        assert_eq!(rank1_inner(&s, &s).unwrap(), 1.0);
        let t = Rank1Term::new(1.0, vec![e(2, 0), e(2, 0), e(2, 0)]).unwrap();
        assert_eq!(rank1_inner(&s, &t).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shape = Shape::new(vec![3, 2, 4]).unwrap();
        for _ in 0..20 {
            let c = random_cpd(&shape, 2, &mut rng).unwrap();
            let (a, b) = (&c.terms()[0], &c.terms()[1]);
            let dense = a.to_dense().inner(&b.to_dense()).unwrap();
            let fast = rank1_inner(a, b).unwrap();
            assert!((dense - fast).abs() <= 1e-12 * (1.0 + dense.abs()));
        }

        let other = Rank1Term::new(1.0, vec![e(3, 0), e(2, 0), e(2, 0)]).unwrap();
        assert!(rank1_inner(&s, &other).is_err());
    }

    #[test]
    fn cpd_eval_sums_terms() {
        let shape = Shape::new(vec![2, 2, 2]).unwrap();
        let t = Rank1Term::new(1.0, vec![e(2, 0), e(2, 0), e(2, 0)]).unwrap();
        let c = CpDecomposition::new(shape.clone(), vec![t.clone()]).unwrap();
        assert_eq!(cpd_eval(&c).get(&[0, 0, 0]), 1.0);

        let neg = Rank1Term::new(-1.0, vec![e(2, 0), e(2, 0), e(2, 0)]).unwrap();
        assert!(neg.scale() > 0.0);
        let c = CpDecomposition::new(shape.clone(), vec![t, neg]).unwrap();
        assert!(cpd_eval(&c).values().iter().all(|&x| x == 0.0));

        // Entrywise oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_cpd(&shape, 2, &mut rng).unwrap();
        let dense = cpd_eval(&c);
        for f in 0..8 {
            let idx = shape.multi_index(f);
            let mut expect = 0.0;
            for term in c.terms() {
                let mut p = term.scale();
                for (k, &i) in idx.iter().enumerate() {
                    p *= term.factors()[k][i];
                }
                expect += p;
            }
            assert!((dense.values()[f] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn sign_convention_pushes_flips_into_first_factor() {
        let t = Rank1Term::new(2.0, vec![e(2, 0), vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(t.factors()[1], vec![1.0, 0.0]);
        assert_eq!(t.factors()[2], vec![0.0, 1.0]);
        assert_eq!(t.factors()[0], vec![1.0, 0.0]);
        let t = Rank1Term::from_vectors(vec![vec![3.0, 0.0], vec![0.0, -2.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(t.scale(), 6.0);
        assert_eq!(t.factors()[0], vec![-1.0, 0.0]);
    }

    #[test]
    fn near_unit_factors_renormalize_far_ones_fail() {
        let t = Rank1Term::new(1.0, vec![vec![1.0 + 1e-8, 0.0], e(2, 0)]).unwrap();
        assert!((norm(&t.factors()[0]) - 1.0).abs() <= UNIT_TOL);
        assert!(Rank1Term::new(1.0, vec![vec![1.1, 0.0], e(2, 0)]).is_err());
        assert!(Rank1Term::new(0.0, vec![e(2, 0), e(2, 0)]).is_err());
    }

    #[test]
    fn random_cpd_terms_are_valid_and_reproducible() {
        let shape = Shape::new(vec![3, 3, 2]).unwrap();
        let a = random_cpd(&shape, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_cpd(&shape, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        for t in a.terms() {
            assert!(t.scale() > 0.0);
            for f in t.factors() {
                assert!((norm(f) - 1.0).abs() <= UNIT_TOL);
            }
        }
    }

    #[test]
    fn gaussian_tensor_is_deterministic() {
        let shape = Shape::new(vec![2, 2, 2]).unwrap();
        let a = random_gaussian_tensor(&shape, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_gaussian_tensor(&shape, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
    }

    #[test]
    fn json_and_binary_forms() {
        let shape = Shape::new(vec![2, 3, 2]).unwrap();
        let t = random_gaussian_tensor(&shape, &mut ChaCha8Rng::seed_from_u64(2));
        let json = t.to_json().unwrap();
        assert!(json.starts_with("{\"dims\":[2,3,2],\"values\":["));
        assert_eq!(DenseTensor::from_json(&json).unwrap(), t);
        let bytes = t.to_bytes();
        assert_eq!(bytes.len(), 8 * (1 + 3 + 12));
        assert_eq!(&bytes[..8], &3u64.to_le_bytes());
        assert_eq!(DenseTensor::from_bytes(&bytes).unwrap(), t);
        assert!(DenseTensor::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        assert!(DenseTensor::from_json("{\"dims\":[2,2],\"values\":[1,2,3]}").is_err());
    }

    #[test]
    fn cpd_json_roundtrip_and_validation() {
        let shape = Shape::new(vec![2, 2, 2]).unwrap();
        let c = random_cpd(&shape, 2, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let back = CpDecomposition::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back.rank(), 2);
        for (a, b) in back.terms().iter().zip(c.terms()) {
            assert!((a.scale() - b.scale()).abs() < 1e-14);
        }
        assert!(CpDecomposition::new(shape, vec![]).is_err());
    }
}
