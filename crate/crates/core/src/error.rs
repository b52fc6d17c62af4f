use thiserror::Error;

/// Errors raised by grid construction, operator assembly and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("diffusivity must be positive, got {value} at {location:?}")]
    NonPositiveDiffusivity { value: f64, location: Vec<f64> },

    #[error("potential evaluated to {value} at r = {at}; potentials must be nonnegative")]
    NegativePotential { value: f64, at: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("invalid norm parameter: {0}")]
    InvalidNorm(String),

    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),

    #[error("eigen_exact size limit: {nodes} unknowns exceeds the limit of {limit}")]
    TooLargeForEigen { nodes: usize, limit: usize },

    #[error("resolvent is singular (pivot {0})")]
    SingularResolvent(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
