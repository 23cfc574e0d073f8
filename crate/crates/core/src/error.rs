use crate::tensor::Shape;

/// Errors raised by the library. Numerical failures of the path tracker are
/// not errors; they are reported as data in [`crate::homotopy::TrackStatus`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: Shape, right: Shape },

    #[error("zero vector in mode {mode}")]
    ZeroFactor { mode: usize },

    #[error("factor in mode {mode} is not unit norm (norm = {norm})")]
    NonUnitFactor { mode: usize, norm: f64 },

    #[error("not a perfect tensor space: r * sigma = {r_sigma} but pi = {pi}")]
    NotPerfect { r_sigma: usize, pi: usize },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
