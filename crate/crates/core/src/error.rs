use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A file did not match its declared format.
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A caller-supplied argument violated an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two inputs that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A formula was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced non-finite or otherwise unusable numbers.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable kind tag, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::InvalidInput(_) => "invalid_input",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::Domain(_) => "domain",
            Error::Numerical(_) => "numerical",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }

    /// Process exit status for this error: 3 for bad input, 4 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Numerical(_) => 4,
            _ => 3,
        }
    }
}
