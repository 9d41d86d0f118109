use thiserror::Error;

use crate::bargaining::BargainOutcome;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),

    #[error("cost model evaluated outside its domain: {0}")]
    DomainError(String),

    #[error("user {user}: residual capacity cannot carry demand {demand}")]
    CapacityExhausted { user: usize, demand: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bargaining ascent did not converge after {iterations} iterations")]
    BargainNoConvergence {
        iterations: usize,
        best: Box<BargainOutcome>,
    },

    #[error("expected {expected} users, game has {found}")]
    WrongArity { expected: usize, found: usize },

    #[error("users do not have identical demands")]
    NotIdentical,

    #[error("operation requires homogeneous costs")]
    NotHomogeneous,

    #[error("flow exchange could not make every user strictly better off: {0}")]
    NotEssentialHere(String),

    #[error("benchmark construction failed: {0}")]
    ConstructionFailed(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}
