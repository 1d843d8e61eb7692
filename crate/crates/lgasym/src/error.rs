//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Operands with incompatible shapes were combined.
    #[error("structural error: {0}")]
    Structural(String),
    /// An exact division left a remainder, or a truncation was too shallow.
    #[error("truncation error: {0}")]
    Truncation(String),
    /// A consistency check inside a multi-step computation failed.
    #[error("pipeline error: {0}")]
    Pipeline(String),
    /// The request is outside the implemented feature set.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Invalid experiment or CLI configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
