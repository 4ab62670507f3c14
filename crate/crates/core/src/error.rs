use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("average precision undefined: query has no correct item in the database")]
    UndefinedAp,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate bandwidth: sigma = {0}")]
    DegenerateSigma(f64),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("corrupt code or container: {0}")]
    Corruption(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("unsupported codec for this protocol: {0}")]
    UnsupportedCodec(String),

    #[error("too few classes: need at least {needed}, got {got}")]
    TooFewClasses { needed: usize, got: usize },

    #[error("checksum mismatch for {path}: manifest says {expected}, file has {actual}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn format_err(offset: u64, msg: impl Into<String>) -> Error {
    Error::Format {
        offset,
        message: msg.into(),
    }
}
