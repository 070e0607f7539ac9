use thiserror::Error;

/// Errors raised anywhere in the synergy pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("joint-count mismatch: expected {expected}, got {got}")]
    JointCount { expected: usize, got: usize },

    #[error("unknown link `{0}`")]
    UnknownLink(String),

    #[error("unregistered manipulator `{name}` (registered: {registered})")]
    UnknownManipulator { name: String, registered: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate normalizer: {axis}-axis std {std:e} is below 1e-9")]
    DegenerateAxis { axis: char, std: f64 },

    #[error("number of principal components {0} is outside 1..=10")]
    ComponentCount(usize),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("refinement iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
