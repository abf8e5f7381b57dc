use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum GmcError {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The covariance matrix is not positive definite and could not be
    /// repaired under the requested policy (grid/epsilon outside the
    /// certified PD radius of the kernel).
    #[error("covariance not positive definite (min eigenvalue {min_eigenvalue:.3e}); grid or epsilon violates the kernel's PD radius")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    /// A region/ball selected no grid points.
    #[error("region `{label}` selects no grid points")]
    EmptyRegion { label: String },

    /// Not enough data for the requested estimator.
    #[error("insufficient data for {what}: need {need}, have {have}")]
    InsufficientData {
        what: &'static str,
        need: usize,
        have: usize,
    },

    /// Degenerate sample input (e.g. all values equal in a Hill estimate).
    #[error("degenerate input for {0}")]
    Degenerate(&'static str),

    /// No closed form is known for the requested parameters.
    #[error("no closed form available: {0}")]
    NoClosedForm(String),

    /// A Goldie-theorem hypothesis fails in the sample.
    #[error("renewal-theorem hypothesis violated: {0}")]
    RenewalHypothesis(String),
}

impl GmcError {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        GmcError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
