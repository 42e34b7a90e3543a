use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("objective is missing required capability `{0}`")]
    MissingCapability(&'static str),

    #[error("desk-scale limit exceeded: {0}")]
    DeskScaleLimit(String),

    #[error("start point lies outside the ball where the Lipschitz bound holds: {0}")]
    OutsideDomain(String),

    #[error("non-finite {quantity} at iteration {k}")]
    NumericalFailure { k: usize, quantity: &'static str },

    #[error("inner prox solve did not reach tolerance after {iters} iterations (gradient norm {residual:e})")]
    InnerSolve { iters: usize, residual: f64 },

    #[error("no sample found in the requested region after {trials} trials")]
    EmptyRegion { trials: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
