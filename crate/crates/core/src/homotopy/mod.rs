//! Single-path homotopy continuation for the decomposition system of a
//! perfect tensor space.

mod decompose;
mod system;
mod tracker;

pub use decompose::{decompose, term_mismatch, Decomposition, DECOMPOSE_ATTEMPTS};
pub use system::{
    build_start, classify_real, complexify, evaluate, jacobian, residual, term_scale, to_cpd, PinnedVariables,
};
pub use tracker::{track, track_with_gamma, TrackResult, TrackStatus, TrackerConfig};
