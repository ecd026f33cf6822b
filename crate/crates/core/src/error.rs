use std::path::PathBuf;

/// Errors raised by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: field lives on {found}, expected {expected}")]
    GridMismatch { expected: String, found: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fibering undefined: d <= 0 (d = {d:e}, threshold = {threshold:e})")]
    NotInLambda { d: f64, threshold: f64 },

    #[error("no bracket for the fiber maximum in [{lo:e}, {hi:e}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("size limit exceeded: {0}")]
    TooLarge(String),

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Failed(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
