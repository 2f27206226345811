use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of bounds: {0}")]
    OutOfBounds(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field `{field}` became non-finite at step {step}")]
    NonFinite { field: String, step: usize },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("{0}")]
    Diagnostics(String),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("twin {which} failed: {source}")]
    Twin {
        which: u8,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
