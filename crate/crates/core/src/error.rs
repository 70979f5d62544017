use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every layer of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("failed to ingest {path}: {reason}")]
    Ingest { path: PathBuf, reason: String },
    #[error("no analyzable layers under the {0} policy")]
    NoAnalyzableLayers(&'static str),
    #[error("unsupported layer for this operation: {0}")]
    UnsupportedLayer(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
