//! Error classes shared across the crate.

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (bad FFT length, inconsistent dimensions, ...).
    #[error("config error: {0}")]
    Config(String),
    /// Rejected input values (non-finite entries and the like).
    #[error("input error: {0}")]
    Input(String),
    /// Dimension mismatch between operands.
    #[error("shape error: {0}")]
    Shape(String),
    /// Operation not valid for the current state (e.g. attaching a memory
    /// bank twice).
    #[error("state error: {0}")]
    State(String),
    /// A sequence does not fit the configured window.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// Not enough samples to run a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed container file (magic, version, header, tensor layout).
    #[error("format error: {0}")]
    Format(String),
    /// Container payload does not match its checksum.
    #[error("checksum error: {0}")]
    Checksum(String),
}

pub type Result<T> = std::result::Result<T, Error>;
