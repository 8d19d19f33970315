use std::path::PathBuf;

/// Errors raised anywhere in the library.
///
/// The CLI maps every variant except [`Error::Usage`] to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("zero surviving rows")]
    NoRows,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("external synthesizer failed ({status}): {stderr}")]
    External { status: String, stderr: String },
    #[error("augmentation not recommended (p = {probability:.4}); pass the force flag to sweep anyway")]
    NotRecommended { probability: f64 },
    #[error("{0} pairs exceeds the exact enumeration limit of 20; use a Monte Carlo test instead")]
    TooManyPairs(usize),
    #[error("no cells")]
    NoCells,
    #[error("usage: {0}")]
    Usage(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
