use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("block index {index} out of range for {len} blocks")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty support")]
    EmptySupport,

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("invalid golfing schedule: {0}")]
    Schedule(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn mismatch(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
