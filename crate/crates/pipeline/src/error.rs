//! Error type for the orchestration layer.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// The config file failed schema or range validation.
    #[error("config: {0}")]
    Config(String),

    /// A stage needs an artifact another stage has not produced yet.
    #[error("{stage}: missing input {path}: {hint}")]
    MissingInput { stage: &'static str, path: PathBuf, hint: &'static str },

    /// A quality gate refused to let the pipeline continue.
    #[error("validation gate: {0}")]
    Gate(String),

    /// A stage that requires fault-free plant rollouts hit a fault.
    #[error("{stage}: plant fault: {source}")]
    Plant {
        stage: &'static str,
        #[source]
        source: orclab_core::PlantError,
    },

    /// An output or checkpoint file exists but cannot be interpreted.
    #[error("malformed data in {path}: {reason}")]
    MalformedData { path: PathBuf, reason: String },

    #[error(transparent)]
    Nn(#[from] orclab_nn::NnError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
