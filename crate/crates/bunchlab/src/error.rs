//! Error type shared by the whole crate.

use thiserror::Error;

/// Crate-wide error enum. Variants map onto the CLI exit-code contract:
/// dimension/domain/index/size-guard failures are caller errors (exit 3),
/// convergence/precision/internal/data-corruption failures indicate the
/// computation itself cannot be trusted (exit 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),
    #[error("eigensolver did not converge: {0}")]
    Convergence(String),
    #[error("precision loss: {0}")]
    Precision(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
    #[error("embedded data corrupted: {0}")]
    DataCorruption(String),
}

pub type Result<T> = std::result::Result<T, Error>;
