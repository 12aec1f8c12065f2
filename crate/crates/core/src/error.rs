use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("weight model does not support r = {r} (tuples have length {len})")]
    UnsupportedCount { r: usize, len: usize },

    #[error("Metropolis-Hastings ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("state space has {states} states, above the cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("chain is reducible: {0} closed classes")]
    Reducible(usize),

    #[error("Poisson system is ill-conditioned (condition estimate {0:.3e})")]
    Singular(f64),

    #[error("kernel is not reversible: detailed balance defect {0:.3e}")]
    NotReversible(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate trajectory: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
