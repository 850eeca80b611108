//! Error type shared across the engine.

use thiserror::Error;

/// Errors produced by parameter validation, quadrature, solvers, and rate
/// assembly.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter failed validation.
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter {
        /// Name of the offending parameter.
        name: &'static str,
        /// What went wrong.
        message: String,
    },

    /// An integral did not converge to the requested tolerance, or the
    /// integrand is not integrable on the requested domain.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// The self-consistent variational solve exhausted its iteration budget.
    #[error("variational solve did not converge: {iterations} iterations, residual {residual:.3e}")]
    SolverNotConverged {
        /// Iterations performed before giving up.
        iterations: usize,
        /// Final relative residual of the fixed-point map.
        residual: f64,
    },

    /// A multi-phonon series was truncated while the last retained term was
    /// still significant.
    #[error(
        "multi-phonon series not converged at order {order}: last term is {last_term_ratio:.3e} of the partial sum"
    )]
    TruncationNotConverged {
        /// Highest order retained.
        order: usize,
        /// |last term| / |partial sum|.
        last_term_ratio: f64,
    },

    /// A divergent rate appeared where a finite value is required.
    #[error("divergent rate encountered: {0}")]
    DivergentRate(String),

    /// A tabulated spectral density file could not be parsed.
    #[error("spectral density table: {0}")]
    Table(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand constructor for parameter validation failures.
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
