use std::path::PathBuf;

/// Crate-wide error type.
///
/// The CLI maps `Usage` to exit code 1 and everything else to exit code 2,
/// so constructors should pick the variant by who is at fault: the invocation
/// (`Usage`) or the data (`Parse` / `Invalid`).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed input file, with the 1-based line that triggered it.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Structurally invalid data not tied to a single input line.
    #[error("{0}")]
    Invalid(String),

    /// An invocation error: bad flag combination, unresolvable stage spec, etc.
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Error::Usage(message.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
