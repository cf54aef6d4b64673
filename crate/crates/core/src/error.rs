//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. The variants map onto the
//! process exit codes used by the batch front end: invalid input (2),
//! resource caps (3), numerical or estimation failure (4).

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated an operation's stated domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A quadrature, root-finding, or linear-algebra routine failed to reach
    /// its accuracy target.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An estimator could not produce a usable value from the given data
    /// (degenerate inputs, non-convergence, empty effective sample).
    #[error("estimation failure: {0}")]
    Estimation(String),

    /// A configured resource limit would be exceeded (memory, iteration caps,
    /// or an output directory already in use).
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    /// Malformed on-disk data (tables, sidecars, stored panels).
    #[error("data format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Convenience constructor for domain violations.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Convenience constructor for numerical failures.
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks a predicate on an input value, returning `InvalidParameter` with a
/// uniform message when it fails.
pub fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.into()))
    }
}
