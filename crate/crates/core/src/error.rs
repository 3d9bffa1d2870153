use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{module}: numerical failure: {detail}")]
    Numerical {
        module: &'static str,
        detail: String,
    },

    #[error("codeword enumeration refused: n = {n} exceeds the enumeration cap of {cap}")]
    EnumerationCap { n: usize, cap: usize },

    #[error("i/o: {0}")]
    Io(String),

    #[error("config line {line}: key `{key}`: {reason}")]
    Parse {
        line: usize,
        key: String,
        reason: String,
    },
}

impl Error {
    pub(crate) fn numerical(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            module,
            detail: detail.into(),
        }
    }

    /// Process exit status for a command that failed with this error:
    /// 1 for i/o, 2 for configuration, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::EnumerationCap { .. } => 2,
            Error::Numerical { .. } => 3,
        }
    }

    pub(crate) fn config(detail: impl Into<String>) -> Self {
        Error::InvalidConfig(detail.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
