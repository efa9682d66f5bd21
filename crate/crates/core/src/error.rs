use thiserror::Error;

/// Errors raised by network evaluation, solvers and the inverse machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative flow {value} at index {index}")]
    NegativeFlow { index: usize, value: f64 },

    #[error("link `{link}` evaluated outside its domain (degree of saturation {saturation})")]
    DomainViolation { link: String, saturation: f64 },

    #[error("delay of `{link}` is not differentiable at flow {flow}")]
    NotDifferentiable { link: String, flow: f64 },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConverged { iterations: usize, residual: f64 },

    #[error("vertex enumeration needs {count} vertices, cap is {cap}")]
    VertexCap { count: u128, cap: usize },

    #[error("link flow is not realisable (residual {residual:e})")]
    NotRealisable { residual: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
