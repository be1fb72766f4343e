use thiserror::Error;

use crate::optimizer::RunTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("component index {index} out of range (n = {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("format error at line {line}: {msg}")]
    Format { line: u64, msg: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("cannot enumerate {n} components (limit {limit})")]
    Capacity { n: usize, limit: usize },

    #[error("no convergence after {iterations} iterations, gradient norm {grad_norm:e}")]
    NotConverged { iterations: usize, grad_norm: f64 },

    /// The run produced a non-finite iterate or objective. The partial trace
    /// ends at the last finite checkpoint.
    #[error("run diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<RunTrace>,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing input: {0}")]
    MissingInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
