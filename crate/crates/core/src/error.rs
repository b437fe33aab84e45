//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A configured resource limit (cache size, expected sample count) was hit.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The random environment degenerated (zero row sum, empty neighborhood).
    #[error("degenerate environment: {0}")]
    Degenerate(String),

    /// An iterative solver exhausted its sweep/iteration budget.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Invalid experiment configuration or CLI usage.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
