use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    Index(String),

    /// A tree or span layout that breaks a structural invariant.
    #[error("invalid structure: {0}")]
    Structure(String),

    /// An `app` arc that is not an adjacent leftward dependency.
    #[error("app constraint violated at character {index}: head is {head}, expected {expected}")]
    AppConstraint {
        index: usize,
        head: usize,
        expected: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
