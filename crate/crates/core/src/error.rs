use thiserror::Error;

/// Errors raised by the numerical routines and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate input ({context}): smallest singular value {smallest_singular_value:e}")]
    Degenerate {
        context: String,
        smallest_singular_value: f64,
    },

    #[error("non-finite value ({context}) at point {point:?}")]
    NonFinite { context: String, point: Vec<f64> },

    #[error("coincident points at indices {i} and {j}")]
    CoincidentPoints { i: usize, j: usize },

    #[error("grid too coarse: {points} points per axis, need at least {required}")]
    GridTooCoarse { points: usize, required: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
