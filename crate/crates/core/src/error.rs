//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong, split by how a caller should react:
/// `Domain`, `ModelInvalid`, `Config` and `Unsupported` are caller mistakes,
/// the remaining variants are numerical failures of the library itself.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters violate the standing assumptions (positivity,
    /// safety loading, positive mean drift).
    #[error("invalid model: {0}")]
    ModelInvalid(String),

    /// Simulation or CLI configuration rejected before any work was done.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The requested operation is not defined for this model variant.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Bracketing or iteration failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// Numerical Laplace inversion lost all significant digits.
    #[error("laplace inversion failure: {0}")]
    Inversion(String),

    /// A computed probability fell outside [0,1] by more than its own
    /// error estimate, or two refinement levels disagreed.
    #[error("numerics error: {0}")]
    Numerics(String),
}
