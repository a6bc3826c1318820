use crate::config::ConfigError;

/// Failure of a pipeline command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Dependency(String),
    #[error("external service error: {0}")]
    External(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Dependency(_) => 3,
            PipelineError::External(_) => 4,
            PipelineError::Other(_) => 1,
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e.0)
    }
}

impl From<miner_core::Error> for PipelineError {
    fn from(e: miner_core::Error) -> Self {
        use miner_core::Error as E;
        match e {
            E::Auth(_) => PipelineError::Config(e.to_string()),
            E::Unavailable(_) | E::Protocol { .. } => PipelineError::External(e.to_string()),
            other => PipelineError::Other(other.into()),
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Other(e.into())
    }
}

impl From<serde_json::Error> for PipelineError {
    fn from(e: serde_json::Error) -> Self {
        PipelineError::Other(e.into())
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
