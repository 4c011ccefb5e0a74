//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument or configuration value is invalid.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A request exceeded a hard size cap (dense matrices, statevector
    /// widths, sector dimensions).
    #[error("size limit exceeded: {what} requires {requested} qubits, cap is {cap}")]
    SizeLimit {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    /// Block-template instantiation missed its target unitary.
    #[error("angle synthesis failed for {block}: residual {residual:.3e} above tolerance")]
    Synthesis { block: &'static str, residual: f64 },

    /// Two series or tables that must be aligned are not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Layout filtering removed every candidate.
    #[error("no feasible layout after excluding flagged qubits")]
    NoFeasibleLayout,

    /// A confusion matrix (or a marginal of one) is singular.
    #[error("confusion matrix on qubit {0} is singular")]
    SingularConfusion(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
