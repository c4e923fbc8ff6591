use std::process::ExitCode;

use rocksr::config::ConfigError;
use rocksr::imaging::ImageError;
use rocksr::models::{CheckpointError, ModelError};
use rocksr::tensor::TensorError;
use rocksr::train::TrainError;
use thiserror::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Format(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Format(_) => 5,
        })
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(_) => CliError::Io(format!("config: {e}")),
            e => CliError::Usage(format!("config: {e}")),
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        let msg = e.to_string();
        match e {
            ImageError::Io { .. } | ImageError::Dataset(_) => CliError::Io(msg),
            ImageError::Unsupported { .. } | ImageError::Malformed { .. } => CliError::Format(msg),
            _ => CliError::Usage(msg),
        }
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::NonFiniteGradient { .. } => CliError::Numerical(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Tensor(t) => t.into(),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io { .. } => CliError::Io(e.to_string()),
            CheckpointError::Model(m) => m.into(),
            e => CliError::Format(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Tensor(t) => t.into(),
            TrainError::Image(i) => i.into(),
            TrainError::Checkpoint(c) => c.into(),
            TrainError::Io { .. } => CliError::Io(e.to_string()),
            TrainError::Config(_) | TrainError::EmptyValidation => CliError::Usage(e.to_string()),
        }
    }
}
