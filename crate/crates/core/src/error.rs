use std::path::PathBuf;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// `Invalid` -> 2 (usage), `Data`/`DataLine`/`Io` -> 3, `Numerical` -> 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameter or configuration value.
    #[error("invalid {field}: {msg}")]
    Invalid { field: &'static str, msg: String },

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Malformed input at a specific line of a text stream.
    #[error("data error at line {line}: {msg}")]
    DataLine { line: usize, msg: String },

    /// A computation left its numerical domain.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Invalid { .. } => 2,
            Error::Data(_) | Error::DataLine { .. } | Error::Io { .. } => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
