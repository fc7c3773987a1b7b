//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes are inconsistent with the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// A configuration value is out of its legal range.
    #[error("config error: {0}")]
    Config(String),

    #[error("unknown model preset `{0}`")]
    UnknownPreset(String),

    /// A named tensor required by the model config is absent from the container.
    #[error("missing weight tensor `{name}`")]
    MissingWeight { name: String },

    /// A container tensor exists but its shape disagrees with the config.
    #[error("weight tensor `{name}`: expected shape {expected:?}, found {found:?}")]
    WeightShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    /// The container holds a tensor the model config does not declare.
    #[error("unknown weight tensor `{name}`")]
    UnknownWeight { name: String },

    /// The binary blob section ends before a manifest entry's range.
    #[error("weight container truncated: {0}")]
    Truncated(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
