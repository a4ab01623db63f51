//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or non-finite input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A run/solver configuration that fails validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An evaluation point too close to a singularity of the model or mesh
    /// (near-zero dual argument, degenerate element, vanishing pivot).
    #[error("near-singular input: {0}")]
    NearSingular(String),

    /// Newton iteration exhausted its budget or the line search collapsed.
    #[error("solver did not converge: {0}")]
    Nonconvergence(String),

    /// A request outside the implemented derivative/operation set.
    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
