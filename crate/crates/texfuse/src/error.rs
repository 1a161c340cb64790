use std::path::PathBuf;
use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum TexError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed image file {path}: {reason}")]
    MalformedImage { path: PathBuf, reason: String },
    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("image too small: {0}")]
    ImageTooSmall(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("training error: {0}")]
    Training(String),
}

pub type Result<T> = std::result::Result<T, TexError>;
