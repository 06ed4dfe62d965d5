use thiserror::Error;

/// Errors reported by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numeric routine failed to produce a usable result. The message
    /// names the offending group and, when relevant, the tuning parameters.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file could not be parsed (CSV cell, JSON document, cache header).
    #[error("parse error: {0}")]
    Parse(String),

    /// A serialized artifact carries an unsupported schema version.
    #[error("schema mismatch: found version {found}, expected {expected}")]
    SchemaMismatch { found: u32, expected: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericFailure(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
