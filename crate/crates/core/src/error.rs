use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "non-finite loss {value} at iteration {iteration}; \
         try a larger epsilon or a smaller learning rate"
    )]
    NonFiniteLoss { iteration: usize, value: f64 },

    #[error("non-finite state at step {step} of {n_steps}")]
    NonFiniteState { step: usize, n_steps: usize },

    #[error("time {t} outside the admissible range [0, {max}]")]
    TimeOutOfRange { t: f64, max: f64 },

    #[error("bridge times must satisfy t_left < t < t_right, got ({t_left}, {t}, {t_right})")]
    TimeOrdering { t_left: f64, t: f64, t_right: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("bad file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
