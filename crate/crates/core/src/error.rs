use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed mesh file {path}: {reason}")]
    MalformedMesh { path: PathBuf, reason: String },
    #[error("mesh has no valid faces")]
    EmptyMesh,
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("contacts coincide (separation {0:e} m)")]
    DegenerateContacts(f64),
    #[error("normal is not unit length (norm {0})")]
    NonUnitNormal(f64),
    #[error("score weights must be nonnegative and sum to 1, got {0:?}")]
    BadWeights([f64; 3]),
    #[error("class thresholds must satisfy 0 < t1 < t2 <= 1, got ({0}, {1})")]
    BadThresholds(f64, f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
