use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Adaptive quadrature ran out of refinement budget.
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e} > tol {tol:e}")]
    Quadrature {
        estimate: f64,
        error_bound: f64,
        tol: f64,
    },

    /// A measure failed one of the linear or moment constraints required by an inner product.
    #[error("constraint `{condition}` violated: |value| = {magnitude:e} exceeds tolerance {tolerance:e}")]
    Constraint {
        condition: String,
        magnitude: f64,
        tolerance: f64,
    },

    /// The requested function or kernel does not meet the operation's contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate Lagrange basis: |p_{i}(xi_{j}) - delta| = {deviation:e}")]
    DegenerateBasis { i: usize, j: usize, deviation: f64 },

    #[error("unknown psi function `{0}`")]
    UnknownPsi(String),

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
}
