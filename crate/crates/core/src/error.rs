use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("body index {index} out of range (world has {len} bodies)")]
    BodyIndex { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no path between {start:?} and {goal:?}")]
    NoPath {
        start: (usize, usize),
        goal: (usize, usize),
    },

    #[error("cell {0:?} is occupied or outside the grid")]
    OccupiedCell((usize, usize)),

    #[error("episode already terminated")]
    EpisodeTerminated,

    #[error("episode still running")]
    EpisodeRunning,

    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid seating plan: {0}")]
    InvalidPlan(String),

    #[error("no episodes to aggregate")]
    Empty,

    #[error("environment {index} failed: {source}")]
    Env {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("record check failed: {0}")]
    RecordCheck(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
