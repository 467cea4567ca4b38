use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("{path}: {message}")]
    File { path: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("locality error: {0}")]
    Locality(String),

    #[error("algebra error: {message} (witness: {witness})")]
    Algebra { message: String, witness: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("limit exceeded: {0}")]
    Limit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used by `--json-errors`.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::File { .. } => "file",
            Error::Parse { .. } => "parse",
            Error::Locality(_) => "locality",
            Error::Algebra { .. } => "algebra",
            Error::Precondition(_) => "precondition",
            Error::Limit(_) => "limit",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
