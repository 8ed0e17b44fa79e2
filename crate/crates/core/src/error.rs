use thiserror::Error;

/// Failure modes shared by every operation in the crate.
///
/// The variants line up with the process exit codes of the `madd` binary,
/// see [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("row {row} has total mass {mass}, expected 1")]
    RowMass { row: usize, mass: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Schema { .. } | Error::RowMass { .. } | Error::Io(_) => 2,
            Error::Precondition(_) => 3,
            Error::Numeric(_) => 4,
            Error::Resource(_) => 5,
        }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
