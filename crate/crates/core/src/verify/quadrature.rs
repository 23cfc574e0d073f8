//! Fixed-order Gauss–Legendre rules.
//!
//! Angular integrals over `[0, π/2]` are split at `π/4`, where every
//! integrand used here has its peak (or kink); each panel gets half the nodes.

use std::f64::consts::FRAC_PI_4;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Node count for 1-D integrals.
pub const NODES_1D: usize = 512;
/// Node count per axis for tensorized 2-D integrals.
pub const NODES_2D: usize = 256;

pub struct Rule {
    pairs: Vec<(f64, f64)>,
}

impl Rule {
    pub fn new(nodes: usize) -> Self {
        let n = NonZeroUsize::new(nodes.max(1)).expect("nonzero");
        Rule {
            pairs: GaussLegendre::new(n).iter().map(|(x, w)| (*x, *w)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (h, m) = (0.5 * (b - a), 0.5 * (b + a));
        self.pairs.iter().map(move |&(x, w)| (m + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Nodes and weights of a two-panel rule on `[0, π/2]` with `nodes` points in total.
pub fn angular_nodes(nodes: usize) -> Vec<(f64, f64)> {
    let rule = Rule::new(nodes / 2);
    rule.mapped(0.0, FRAC_PI_4)
        .chain(rule.mapped(FRAC_PI_4, 2.0 * FRAC_PI_4))
        .collect()
}

/// `∫₀^{π/2} f(θ) dθ` on the two-panel rule.
pub fn integrate_angle<F: FnMut(f64) -> f64>(nodes: usize, mut f: F) -> f64 {
    angular_nodes(nodes).into_iter().map(|(x, w)| w * f(x)).sum()
}
