use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported color space: {0}")]
    ColorSpace(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The input has no usable structure for the requested operation
    /// (pure gray chromaticity, identical PCA samples, empty regions).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn decode(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Decode {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures at the file boundary (unreadable, truncated or
    /// undecodable files) rather than in the data itself.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Decode { .. })
    }
}
