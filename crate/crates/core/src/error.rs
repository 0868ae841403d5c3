use thiserror::Error;

/// Errors produced by the toolkit.
///
/// The variants line up with the CLI exit codes: `Input` is a usage problem,
/// `Capability` means a size or search budget was exceeded, `Numeric` flags
/// non-finite values or integer overflow.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("capability limit: {0}")]
    Capability(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
