use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the test, calibration and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The Gram matrix of a weight matrix is (numerically) singular, so no
    /// stable dual basis exists.
    #[error("weight design is rank deficient (smallest eigenvalue / n = {k:e})")]
    RankDeficient { k: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid weights: {0}")]
    Weight(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParam(msg.into())
}
