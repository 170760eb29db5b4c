use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {message} (residual {residual:e})")]
    NumericalFailure { message: String, residual: f64 },

    #[error(
        "exact LTM refused: dimension {dim} exceeds the exact limit {limit}; \
         use the sampled estimator or raise the limit"
    )]
    ExactLimitExceeded { dim: usize, limit: usize },

    #[error("singular absorption: spectral radius of Q is {radius}")]
    SingularAbsorption { radius: f64 },

    #[error("simulation refused: dimension {dim} exceeds the dense cap {cap}")]
    SimulationCap { dim: usize, cap: usize },

    #[error("Kraus flattening refused: {count} operators exceeds the limit {limit}")]
    KrausLimit { count: usize, limit: usize },

    #[error("variance {0} is negative beyond tolerance")]
    NegativeVariance(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
