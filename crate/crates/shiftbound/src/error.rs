//! Error type shared across the crate.
//!
//! Infinite divergences are not errors; they are legitimate values reported
//! through finiteness flags. Errors are reserved for inputs outside an
//! operation's domain, violated preconditions, failed numerical integration,
//! and simulations that leave the representable range.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller violated a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Numerical integration did not converge to the requested tolerance.
    #[error("integration failed: {0}")]
    Integration(String),

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A simulated state became non-finite.
    #[error("simulation produced a non-finite state at step {step}")]
    Simulation { step: usize },
}
