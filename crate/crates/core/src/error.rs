use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid scope box: {0}")]
    InvalidScope(String),

    #[error("state {0:?} lies outside the scope")]
    OutOfScope(Vec<i64>),

    #[error("stage {stage} outside the computed interval {lo}..={hi}")]
    StageOutOfRange { stage: usize, lo: usize, hi: usize },

    #[error("move {0:?} is not in the declared range")]
    MoveNotInRange(Vec<i64>),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error(
        "stage cost unbounded: horizon {horizon} x max stage cost {max_stage_cost} >= top bound {top_bound}"
    )]
    StageCostUnbounded {
        horizon: usize,
        max_stage_cost: u64,
        top_bound: u64,
    },

    #[error("policy mode unavailable: {0}")]
    ModeUnavailable(String),

    #[error("oracle node budget of {0} exceeded")]
    NodeBudgetExceeded(u64),

    #[error("task is not perforated even with a zero-width tube")]
    NotPerforated,

    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("task file: {0}")]
    TaskFile(String),

    #[error("malformed dump: {0}")]
    Dump(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
