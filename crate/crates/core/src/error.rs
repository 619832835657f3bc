use std::path::PathBuf;

/// Errors raised anywhere in the conversion pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed audio file: {0}")]
    Format(String),
    #[error("unsupported encoding: {0}")]
    Unsupported(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("signal is entirely silent")]
    EmptyOutput,
    #[error("alignment failed: {0}")]
    Alignment(String),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite loss at iteration {iteration} (samples {samples:?})")]
    NonFinite { iteration: usize, samples: Vec<String> },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
