use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or parameter value violates a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-increasing timestamp: {current} s follows {previous} s")]
    NonMonotoneTime { previous: f64, current: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("innovation covariance is numerically singular (det = {0:e})")]
    SingularInnovation(f64),

    #[error("simulation diverged at step {step} (t = {time} s)")]
    Diverged { step: usize, time: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config format: {0}")]
    Toml(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (flags, config, files) rather
    /// than a failure while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidArgument(_)
                | Error::UnknownParameter(_)
                | Error::Toml(_)
                | Error::Io { .. }
        )
    }
}
