use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("capacity exceeded: {what} is {value}, limit is {limit}")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("instance generation failed after {attempts} candidate instances")]
    GenerationFailure { attempts: u64 },

    /// Solution-cover generation ran out of budget. `missing` lists the
    /// assignments (as integers) for which no USA instance was found.
    #[error("solution cover incomplete: {} of {total} solutions missing", missing.len())]
    PartialCover { missing: Vec<u64>, total: usize },

    #[error("invalid state: {0}")]
    State(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate gap: {0}")]
    DegenerateGap(String),

    #[error("numerical accuracy: {0}")]
    Accuracy(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
