use thiserror::Error;

/// Errors raised by the solver, the auditors, and the file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A point lies outside the operator's domain.
    #[error("point outside the domain: {0}")]
    Domain(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A hypothesis of the check does not hold for the given input.
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    /// Some step size in a requested span equals 1, so `prod (1 - t_s)^-1` is undefined.
    #[error("undefined product: t_{step} = 1")]
    UndefinedProduct { step: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
