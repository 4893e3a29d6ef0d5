use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("temporal share is undefined at t = 0")]
    UndefinedShare,

    #[error("shares sum to {sum}, exceeding n_max = {n_max}; no window length is feasible")]
    StructurallyInfeasible { sum: String, n_max: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("infeasible shares: {0}")]
    InfeasibleShares(String),

    #[error("window length {s} is infeasible: {reason}")]
    InfeasibleWindow { s: u64, reason: String },

    #[error("feasible virtual-user set became empty at slot {t} of {s}")]
    EmptyLiveSet { t: u64, s: u64 },

    #[error("virtual user {index} excluded earlier is admissible again at slot {t}")]
    LiveSetGrew { index: usize, t: u64 },

    #[error("schedule exhausted: slot {t} requested from a window of {s}")]
    Exhausted { t: u64, s: u64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("bound is undefined for epsilon = {0}")]
    UndefinedBound(f64),

    #[error("no runs to aggregate")]
    NoRuns,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
