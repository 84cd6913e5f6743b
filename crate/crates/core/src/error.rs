use thiserror::Error;

/// Errors raised across ingestion, reduction and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(String),

    #[error("validation error: {entity}: {reason}")]
    Validation { entity: String, reason: String },

    #[error("{0}")]
    Topology(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("Courant number {courant:.6} exceeds 1 at node {node}")]
    CourantViolation { node: usize, courant: f64 },

    #[error("non-finite state at t = {time} s, node {node}")]
    NonFinite { time: f64, node: usize },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(entity: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            entity: entity.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CourantViolation { .. } | Error::NonFinite { .. } | Error::NoConvergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
