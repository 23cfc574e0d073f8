//! Empirical CCDFs, power-law tail fits and the Bergqvist–Forrester
//! real-rank probabilities of `n × n × 2` tensors.
//!
//! The tail model is `c(x) = a·x^{−b}`, a straight line in log-log
//! coordinates. It is fitted by ordinary least squares on
//! `(log x, log c(x))` over the sample points with `1e-3 ≤ c(x) ≤ 1e-1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FIT_C_LOW: f64 = 1e-3;
pub const FIT_C_HIGH: f64 = 1e-1;
pub const MIN_FIT_POINTS: usize = 10;

/// `c(x) = #{v > x}/n` over a finite sample of positive values.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCcdf {
    sorted: Vec<f64>,
}

impl EmpiricalCcdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "CCDF values must be finite and positive, got {v}"
            )));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCcdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        let le = self.sorted.partition_point(|&v| v <= x);
        (self.sorted.len() - le) as f64 / self.sorted.len() as f64
    }

    /// Smallest sample value `v` with `c(v) ≤ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        // c(sorted[k]) ≤ p  ⇔  #{v > sorted[k]} ≤ p n; scan the sorted array.
        let target = (p * n as f64).floor() as usize;
        let k = n.saturating_sub(target + 1);
        let x = self.sorted[k];
        // Ties may push c below p at an earlier index; step back to the first copy.
        let first = self.sorted.partition_point(|&v| v < x);
        self.sorted[first]
    }

    /// `(x, c(x))` at every distinct sample value.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let j = self.sorted.partition_point(|&v| v <= x);
            out.push((x, (self.sorted.len() - j) as f64 / n));
            i = j;
        }
        out
    }
}

pub fn empirical_ccdf(values: &[f64]) -> Result<EmpiricalCcdf> {
    EmpiricalCcdf::new(values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub fit_range: (f64, f64),
    pub points_used: usize,
}

/// Least-squares fit of `log c = log a − b log x` over the tail points.
pub fn fit_tail(ccdf: &EmpiricalCcdf) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = ccdf
        .points()
        .into_iter()
        .filter(|&(_, c)| (FIT_C_LOW..=FIT_C_HIGH).contains(&c))
        .map(|(x, c)| (x.ln(), c.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all tail points share one abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(TailFit {
        a: intercept.exp(),
        b: -slope,
        r_squared,
        fit_range: (FIT_C_LOW, FIT_C_HIGH),
        points_used: pts.len(),
    })
}

/// Natural log of the Barnes G-function at a positive integer,
/// `G(n) = Π_{k=1}^{n−2} k!`.
pub fn ln_barnes_g(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("Barnes G needs n >= 1".into()));
    }
    let mut acc = 0.0;
    let mut ln_fact = 0.0;
    for k in 1..n.saturating_sub(1) {
        ln_fact += (k as f64).ln();
        acc += ln_fact;
    }
    Ok(acc)
}

/// Barnes G-function at a positive integer.
pub fn barnes_g(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("Barnes G needs n >= 1".into()));
    }
    let mut g = 1.0;
    let mut fact = 1.0;
    for k in 1..n.saturating_sub(1) {
        fact *= k as f64;
        g *= fact;
    }
    Ok(g)
}

/// Probability that a Gaussian `n × n × 2` tensor has real rank `n`,
/// `p_n = Γ((n+1)/2)^n / G(n+1)`.
pub fn bf_probability(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    let g = statrs::function::gamma::gamma((n as f64 + 1.0) / 2.0);
    // Interleave the n factors of Γ with the n−1 factorials of G(n+1) so the
    // running product stays moderate.
    let mut p = g;
    let mut fact = 1.0;
    for k in 1..n {
        fact *= k as f64;
        p *= g / fact;
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TruncatedMean {
    Finite(f64),
    /// The fitted tail has `b ≤ 1`, so the mean diverges.
    Infinite,
}

/// Mean estimate from the empirical part below `kappa0` and the fitted
/// power-law tail above it: `(1/n)Σ_{v≤κ0} v + a b κ0^{1−b}/(b−1)`.
pub fn truncated_mean(values: &[f64], fit: &TailFit, kappa0: f64) -> TruncatedMean {
    if fit.b <= 1.0 {
        return TruncatedMean::Infinite;
    }
    let n = values.len() as f64;
    let body: f64 = values.iter().filter(|&&v| v <= kappa0).sum::<f64>() / n;
    let tail = fit.a * fit.b * kappa0.powf(1.0 - fit.b) / (fit.b - 1.0);
    TruncatedMean::Finite(body + tail)
}

/// The sample value where the CCDF drops to the upper end of the fit range.
pub fn default_kappa0(ccdf: &EmpiricalCcdf) -> f64 {
    ccdf.quantile(FIT_C_HIGH)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Regular,
    Angular,
}

/// Fit summary written by the `fit` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub shape: String,
    pub r: usize,
    pub which: Which,
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    pub points_used: usize,
    pub excluded_inf: usize,
    pub samples: usize,
    pub kappa0: f64,
    #[serde(with = "crate::numfmt::inf_f64")]
    pub truncated_mean: f64,
}

/// Splits condition numbers into the finite ones and a count of `∞` entries.
pub fn split_infinite(values: &[f64]) -> (Vec<f64>, usize) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let excluded = values.len() - finite.len();
    (finite, excluded)
}
