use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    /// A class is missing from a partition that must contain every class.
    #[error("class {class} is absent from the training partition (seed {seed}); retry with another seed or stratified mode")]
    Stratification { class: usize, seed: u64 },

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("feature kind error: {0}")]
    Kind(String),

    #[error("exact retrain backend supports at most {cap} features, dataset has {m}; use the marginal sampling backend")]
    TooManyFeatures { m: usize, cap: usize },

    #[error("cosine similarity undefined for a zero vector")]
    UndefinedSimilarity,

    #[error("provenance mismatch: {0}")]
    Pairing(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("wall-clock budget of {0:?} exceeded")]
    Budget(std::time::Duration),

    #[error("checksum mismatch for {path}: expected {expected}, got {got}")]
    Checksum {
        path: PathBuf,
        expected: String,
        got: String,
    },

    #[error("download failed: {0}")]
    Download(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
