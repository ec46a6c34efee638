use thiserror::Error;

use crate::nn::Checkpoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("file consistency error: {0}")]
    Consistency(String),
    #[error("unexpected end of data: {0}")]
    Length(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("provenance violation: {0}")]
    Provenance(String),
    #[error("undefined ratio: {0}")]
    Undefined(String),
    #[error("non-finite gradient in tensor {tensor} at element {index}")]
    NonFiniteGradient { tensor: usize, index: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence {
        epoch: usize,
        reason: String,
        /// Most recent checkpoint whose parameters were all finite.
        last_good: Option<Box<Checkpoint>>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
