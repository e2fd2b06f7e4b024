use thiserror::Error;

/// Errors raised by the estimation library.
///
/// The variants map one-to-one onto the CLI exit codes (see [`HodseError::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HodseError {
    /// Malformed or out-of-range input.
    #[error("input error: {0}")]
    Input(String),
    /// A text file could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// An operation was called outside its contract (e.g. non-centered data).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A dense computation would exceed its memory/enumeration budget.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A numerical procedure did not reach its target accuracy.
    #[error("numeric failure: {message} (achieved {achieved:e})")]
    Numeric { message: String, achieved: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}

impl HodseError {
    pub fn input(msg: impl Into<String>) -> Self {
        HodseError::Input(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        HodseError::Contract(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        HodseError::Capacity(msg.into())
    }

    pub fn numeric(msg: impl Into<String>, achieved: f64) -> Self {
        HodseError::Numeric {
            message: msg.into(),
            achieved,
        }
    }

    /// Stable process exit code: 2 input/parse, 3 contract/capacity, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            HodseError::Input(_) | HodseError::Parse { .. } | HodseError::Io(_) => 2,
            HodseError::Contract(_) | HodseError::Capacity(_) => 3,
            HodseError::Numeric { .. } => 4,
        }
    }
}

impl From<std::io::Error> for HodseError {
    fn from(e: std::io::Error) -> Self {
        HodseError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HodseError>;
