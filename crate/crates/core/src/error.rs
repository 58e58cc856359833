use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model, prior or weight parameter violates its domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Data handed to an operation does not satisfy its preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The requested work exceeds a configured budget.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl Error {
    /// Process exit status for this error: 2 I/O, 3 resource, 64 usage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } => 2,
            Error::Resource(_) => 3,
            Error::Parameter(_)
            | Error::Input(_)
            | Error::Usage(_)
            | Error::Config(_)
            | Error::Degenerate(_) => 64,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
