use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClickError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The photon-number truncation could not reach the requested tail bound.
    #[error("cutoff error: tail bound {achieved:e} exceeds requested {requested:e} at M = {cutoff}")]
    Cutoff {
        achieved: f64,
        requested: f64,
        cutoff: usize,
    },

    /// Floating-point cancellation could not be controlled.
    #[error("precision error: {0}")]
    Precision(String),
}

impl ClickError {
    /// Short machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            ClickError::Domain(_) => "domain",
            ClickError::Cutoff { .. } => "cutoff",
            ClickError::Precision(_) => "precision",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        ClickError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, ClickError>;
