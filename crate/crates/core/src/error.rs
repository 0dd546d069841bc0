use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient audio: need at least {needed} samples, got {got}")]
    InsufficientAudio { needed: usize, got: usize },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("cannot stratify: class {class} has {count} samples, fewer than k={k}")]
    Stratification {
        class: usize,
        count: usize,
        k: usize,
    },

    #[error("unsupported format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("model checksum mismatch: header says {expected:08x}, blob hashes to {actual:08x}")]
    Checksum { expected: u32, actual: u32 },

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("truncated model blob: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("malformed model file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}
