use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid, ring {ring}: {reason}")]
    InvalidGrid { ring: usize, reason: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("empty mask")]
    EmptyMask,

    #[error("total loss weight is zero")]
    ZeroWeight,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("category vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("scene spec cannot place any instance: {0}")]
    Unplaceable(String),

    #[error("image {0} not found in archive")]
    MissingImage(u64),

    #[error("segment id mismatch for image {image_id}: {detail}")]
    IdMismatch { image_id: u64, detail: String },

    #[error("area mismatch for image {image_id}, segment {segment_id}: json {json} vs png {png}")]
    AreaMismatch {
        image_id: u64,
        segment_id: u32,
        json: u64,
        png: u64,
    },

    #[error("malformed png {path}: {detail}")]
    MalformedPng { path: PathBuf, detail: String },

    #[error("malformed tensor file {path}: {detail}")]
    MalformedTensor { path: PathBuf, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
