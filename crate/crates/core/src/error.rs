use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid emitter `{name}`: {reason}")]
    InvalidEmitter { name: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("backward called on {0} without a saved forward context")]
    NoContext(&'static str),

    #[error("non-finite gradient in parameter tensor {0}")]
    NonFiniteGradient(usize),

    #[error("non-finite loss at epoch {epoch}, step {step}: {terms}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        terms: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParam(msg.into())
}
