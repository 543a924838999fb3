use std::path::PathBuf;

use canoa::pipeline::PipelineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {msg}")]
    Config { path: PathBuf, line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("power trace of ECU {ecu} not found at {path}")]
    MissingChannel { ecu: usize, path: PathBuf },
    #[error("bundle expects {expected} power channels, the traces hold {got}")]
    BundleMismatch { expected: usize, got: usize },
    #[error("{context}: {source}")]
    Pipeline {
        context: String,
        #[source]
        source: PipelineError,
    },
}

impl CliError {
    /// 1 for usage errors, 2 for everything that went wrong with the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn pipeline(context: impl Into<String>) -> impl FnOnce(PipelineError) -> Self {
        let context = context.into();
        move |source| CliError::Pipeline { context, source }
    }
}

/// Lifts any core error into a pipeline error with context.
pub(crate) fn ctx<E: Into<PipelineError>>(context: impl Into<String>) -> impl FnOnce(E) -> CliError {
    let context = context.into();
    move |e| CliError::Pipeline {
        context,
        source: e.into(),
    }
}
