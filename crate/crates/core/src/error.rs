use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported demand model: {operation} requires {required}")]
    UnsupportedModel {
        operation: &'static str,
        required: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("payoff tensor too large: {profiles} profiles exceeds cap {cap}")]
    TooLarge { profiles: u128, cap: usize },
    #[error("undefined benchmark: monopoly and Nash prices coincide ({0})")]
    UndefinedBenchmark(String),
    #[error("deviation probe unavailable: episode did not converge")]
    ProbeUnavailable,
    #[error("trace format: {0}")]
    Format(String),
    #[error("schema version mismatch: artifact has {found}, this build reads {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
