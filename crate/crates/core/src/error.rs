use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::WeightMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// Every feature is orthogonal to every response, so lambda_max is zero.
    #[error("degenerate data: all features are orthogonal to the responses")]
    DegenerateData,

    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("lambda {lambda} out of range: {reason}")]
    LambdaOutOfRange { lambda: f64, reason: String },

    #[error("normal vector at the reference point vanishes")]
    ZeroNormal,

    #[error("inner product {value:e} is below the tolerance -{tolerance:e}; reference solution is inconsistent")]
    NegativeInnerProduct { value: f64, tolerance: f64 },

    #[error("secular equation did not converge after {iterations} iterations (boundary residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solver hit max_iters={iterations} with KKT residual {residual:e}")]
    MaxItersExceeded {
        best: Box<WeightMatrix>,
        residual: f64,
        iterations: usize,
    },

    #[error("task weight must be positive, got {0}")]
    NonPositiveWeight(f64),

    #[error("frobenius weight must be positive, got {0}")]
    NonPositiveRho(f64),

    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed user input (files, flags).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::NonFinite(_)
                | Error::Empty(_)
                | Error::Parse { .. }
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Io(_)
                | Error::InvalidConfig(_)
                | Error::InvalidGrid(_)
        )
    }
}
