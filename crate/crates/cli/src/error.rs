use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or invocation.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(semiclassical::Error),

    #[error("verification failed: {0}")]
    Verification(String),

    /// Some runs of a batch failed; their rows are marked.
    #[error("{0}")]
    Failed(String),

    #[error("{0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<semiclassical::Error> for CliError {
    fn from(e: semiclassical::Error) -> Self {
        match e {
            semiclassical::Error::Config(msg) => CliError::Usage(msg),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Verification(_) => 4,
            _ => 3,
        })
    }
}
