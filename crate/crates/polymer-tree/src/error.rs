use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// A Legendre-transform query outside the achievable slope range.
    /// Carries the valid open interval so callers can clamp or report.
    #[error("alpha {alpha} outside achievable range ({lo}, {hi})")]
    AlphaOutOfRange { alpha: f64, lo: f64, hi: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("sampling failure: {0}")]
    Sampling(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI for structured stderr.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) | Error::AlphaOutOfRange { .. } => "domain",
            Error::Unsupported(_) => "unsupported",
            Error::Resource(_) => "resource",
            Error::Internal(_) => "internal",
            Error::Sampling(_) => "sampling",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
