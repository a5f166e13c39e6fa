use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, received {received}")]
    DimMismatch {
        context: String,
        expected: usize,
        received: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("non-finite intermediate at tape node {node} ({op})")]
    NonFiniteNode { node: usize, op: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown environment `{name}`; valid names: {valid}")]
    UnknownEnv { name: String, valid: String },

    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("non-finite state at rollout step {step}")]
    RolloutDiverged { step: usize },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, received: usize) -> Self {
        Error::DimMismatch {
            context: context.into(),
            expected,
            received,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
