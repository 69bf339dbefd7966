use thiserror::Error;

use crate::solver::TraceRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is outside the domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The solver finished without a single productive step, so neither the
    /// averaged iterate nor the dual estimate is defined.
    #[error("no productive steps after {iterations} iterations")]
    NoProductiveSteps {
        iterations: usize,
        trace: Vec<TraceRecord>,
    },

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("markov chain has no unique stationary distribution: {0}")]
    NoUniqueStationary(String),

    #[error("relative value iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("chain did not mix within {t_max} steps")]
    NotMixing { t_max: usize },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("worker failure: {0}")]
    Worker(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
