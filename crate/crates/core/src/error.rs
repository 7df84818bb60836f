use std::io;

use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("index {index} out of range (size {len})")]
    Index { index: usize, len: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("non-finite parameter detected in epoch {epoch} at observation {observation}")]
    NonFinite { epoch: usize, observation: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
