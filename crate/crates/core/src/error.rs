use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A conditional distribution was queried outside the marginal support,
    /// or a distribution was built from invalid weights.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid environment, algorithm or hyperparameter configuration.
    #[error("config error: {0}")]
    Config(String),

    /// An iterative solver hit its sweep cap before reaching tolerance.
    #[error("no convergence after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("malformed episode: {0}")]
    MalformedEpisode(String),

    /// An operation outside the differentiable op set was requested.
    #[error("unsupported op: {0}")]
    UnsupportedOp(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
