use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown model `{name}` (available: {})", available.join(", "))]
    UnknownModel {
        name: String,
        available: Vec<String>,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("`{op}` is not supported for {kind} densities")]
    Unsupported { op: &'static str, kind: String },

    #[error("misconfigured scenario: {0}")]
    Misconfigured(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad user input rather than by evaluation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NonFinite(_) | Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
