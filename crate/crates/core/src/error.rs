use thiserror::Error;

/// Errors produced by parsing, model validation, and analysis entry points.
#[derive(Error, Debug)]
pub enum Error {
    /// Malformed input data; `line` is 1-based within the stream being parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The model file was understood but uses a feature this crate does not
    /// support (e.g. categorical splits).
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// The model is structurally invalid (dangling child index, cycle, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A caller-supplied argument violates the documented contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn arg(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
