//! Crate-wide error type.

use serde::{Deserialize, Serialize};

pub type Result<T> = std::result::Result<T, Error>;

/// Evidence that no (strictly) feasible allocation exists, naming the
/// constraint that resisted the hardest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InfeasibilityReport {
    /// Human-readable name of the most violated constraint.
    pub most_violated: String,
    /// Minimized maximum violation; positive means provably no feasible point.
    pub min_violation: f64,
    /// True when the closed feasible set may be nonempty but its strict
    /// interior is (numerically) empty; callers fall back to penalty mode.
    pub empty_interior: bool,
}

impl std::fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "most violated constraint {:?} with residual violation {:.6e}",
            self.most_violated, self.min_violation
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible problem: {0}")]
    Infeasible(InfeasibilityReport),

    #[error("resource {resource:?} cannot be covered by any instance type")]
    UncoverableResource { resource: String },

    #[error("search budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// True when the error certifies that no feasible allocation exists.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_) | Error::UncoverableResource { .. }
        )
    }
}
