use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("objects live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("order mismatch: expected {expected}, found {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("evaluation too large: {0}")]
    TooLarge(String),

    #[error("no exponential-type certificate available for this family")]
    NoCertificate,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("effective sample size {ess:.3} below {min} ({hits} samples hit the event out of {samples})")]
    EffectiveSampleSize {
        ess: f64,
        min: f64,
        hits: usize,
        samples: usize,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::GridMismatch => "grid_mismatch",
            Error::Dimension { .. } => "dimension",
            Error::NonFinite(_) => "non_finite",
            Error::OrderMismatch { .. } => "order_mismatch",
            Error::TooLarge(_) => "too_large",
            Error::NoCertificate => "no_certificate",
            Error::Numerical(_) => "numerical",
            Error::EffectiveSampleSize { .. } => "effective_sample_size",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Errors in the input itself rather than in a computation.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::GridMismatch
                | Error::Dimension { .. }
                | Error::OrderMismatch { .. }
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
