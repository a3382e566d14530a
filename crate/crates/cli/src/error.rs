use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Core(#[from] debias_core::Error),
    #[error("no training rows with day <= {split_day}")]
    EmptyTrain { split_day: u32 },
    #[error("no test rows with day > {split_day}")]
    EmptyTest { split_day: u32 },
    #[error("{0}")]
    Usage(String),
    #[error("featurizer outputs differ between the integer and string kernels")]
    Mismatch,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> CliError {
        CliError::Parse { path: path.into(), line, message: message.into() }
    }

    /// Category printed in front of the error line.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Csv { .. } | CliError::Parse { .. } => "parse",
            CliError::Core(e) => e.category(),
            CliError::EmptyTrain { .. } => "empty-train",
            CliError::EmptyTest { .. } => "empty-test",
            CliError::Usage(_) => "usage",
            CliError::Mismatch => "mismatch",
        }
    }
}
