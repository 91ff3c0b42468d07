use thiserror::Error;

/// Errors raised by grid construction, operators, solvers and experiments.
#[derive(Debug, Error)]
pub enum LabError {
    /// A caller violated an operation's contract (bad arguments, mismatched inputs).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Staggering of an input is incompatible with the requested operator.
    #[error("staggering mismatch: {0}")]
    Staggering(String),
    /// An iterative solve did not reach its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// A weight or source certificate failed.
    #[error("certificate failure: {0}")]
    Certificate(String),
    /// Non-finite input or output encountered.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// Malformed snapshot data.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        LabError::Contract(msg.into())
    }

    /// True for failures of numerics rather than of the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LabError::NonConvergence { .. } | LabError::NonFinite(_) | LabError::Certificate(_)
        )
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
