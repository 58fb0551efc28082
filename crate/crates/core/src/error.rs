use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero on tape node {0}")]
    DivisionByZero(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown problem code `{0}`")]
    UnknownProblem(String),

    #[error("missing boundary group `{0}`")]
    MissingBoundary(String),

    #[error("point ({0}, {1}) lies inside the hole")]
    InsideHole(f64, f64),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite loss at epoch {epoch}: {value}")]
    NonFinite { epoch: usize, value: f64 },

    #[error("node sets do not match: {0}")]
    NodeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
