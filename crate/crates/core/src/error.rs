use thiserror::Error;

/// Errors raised by the library.
///
/// Variants are grouped by what went wrong so that front ends can map them
/// onto exit codes: bad parameters, bad input data, or inconsistent
/// artifacts.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("duplicate id `{id}` on line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("structure too large for brute-force evaluation: {0}")]
    SizeLimit(String),

    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
