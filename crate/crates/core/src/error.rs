use thiserror::Error;

/// Errors produced by the separation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A function was evaluated at a singular point.
    #[error("singularity: {0}")]
    Singularity(String),

    /// Invalid geometry, timing or physical constants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Requested harmonic order exceeds what the sampling scheme integrates exactly.
    #[error("order {requested} exceeds the exact order {available} of the sampling scheme")]
    Order { requested: usize, available: usize },

    /// Frames were fed out of order.
    #[error("frame sequence error: expected sample {expected}, got {got}")]
    Sequence { expected: u64, got: u64 },

    /// Buffer lengths disagree.
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    /// A source or sensor sits somewhere it cannot.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Malformed input data.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Length { expected, got })
    }
}
