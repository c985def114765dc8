//! Error taxonomy shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    /// Invalid input value (wrong length, zero label, division by zero, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input outside the supported size limits.
    #[error("range error: {0}")]
    Range(String),

    /// A convex-geometry precondition failed (non-member point, empty face).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Malformed input document.
    #[error("parse error: {0}")]
    Parse(String),

    /// An internal invariant did not hold; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code for CLI error objects.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Range(_) => "range",
            Error::Geometry(_) => "geometry",
            Error::Parse(_) => "parse",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
