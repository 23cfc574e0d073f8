//! Condition numbers of canonical polyadic decompositions (CPDs) and Monte
//! Carlo sampling of Gaussian identifiable tensors.

pub mod condition;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod homotopy;
pub mod linalg;
pub mod numfmt;
pub mod sampler;
pub mod segre;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
