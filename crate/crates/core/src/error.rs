use thiserror::Error;

/// Errors reported by the simulator and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("framing error: {len} bits is not a multiple of the block length {block}")]
    Framing { len: usize, block: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
