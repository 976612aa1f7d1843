use thiserror::Error;

/// Errors raised by the Gaussian toolkit, the link model and the key-rate layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("mode index {index} out of range for a {modes}-mode state")]
    ModeIndex { index: usize, modes: usize },

    #[error("non-physical state: smallest symplectic eigenvalue {0:.3e}")]
    NonPhysical(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("gain {gain} exceeds the power constraint G_max = {g_max} at V = {v}")]
    ConstraintViolation { v: f64, gain: f64, g_max: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
