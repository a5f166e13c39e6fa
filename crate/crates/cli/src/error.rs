use prefine_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input {path}: {what}")]
    MissingInput { what: &'static str, path: String },
    #[error("invalid config file {path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad invocations or unreadable inputs, 1 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::MissingInput { .. } | CliError::Config { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::Parse { .. }
                | CoreError::UnknownEnv { .. }
                | CoreError::InvalidArgument(_)
                | CoreError::Checkpoint(_)
                | CoreError::Json(_)
                | CoreError::Io(_) => 2,
                _ => 1,
            },
            CliError::Csv(_) | CliError::Io(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
