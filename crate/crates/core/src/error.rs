//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the beamtrack pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Vector/matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// An index is outside its valid range.
    #[error("index out of range: {0}")]
    OutOfRange(String),

    /// An operation received an empty input it cannot handle.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A serialized artifact is malformed or inconsistent.
    #[error("data format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
