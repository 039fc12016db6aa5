use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the reduced-order-model pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("requested rank {requested} exceeds available rank {available}")]
    Rank { requested: usize, available: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite state at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("calibration infeasible: {0}")]
    CalibrationInfeasible(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
