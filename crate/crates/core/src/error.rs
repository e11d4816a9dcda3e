//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by feature extraction, model training, decoding and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("input too short: {0}")]
    InputTooShort(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty band: {0}")]
    EmptyBand(String),

    #[error("annotation out of range: {0}")]
    AnnotationOutOfRange(String),

    #[error("no complete bar in annotated span: {0}")]
    NoCompleteBar(String),

    #[error("empty grid bin: {0}")]
    EmptyGridBin(String),

    #[error("untrained model: {0}")]
    UntrainedModel(String),

    #[error("impossible observation: {0}")]
    ImpossibleObservation(String),

    #[error("frame rate mismatch: expected {expected}, got {got}")]
    FrameRateMismatch { expected: f64, got: f64 },

    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("wav error in {path}: {message}")]
    Wav { path: String, message: String },

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
