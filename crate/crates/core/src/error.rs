use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("training diverged: non-finite value in `{param}`")]
    TrainingDiverged { param: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("too few users: need at least {needed}, got {got}")]
    TooFewUsers { needed: usize, got: usize },

    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used as the CLI error prefix.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidShape(_) => "shape",
            Error::TrainingDiverged { .. } => "diverged",
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Pairing(_) => "pairing",
            Error::Split(_) => "split",
            Error::Evaluation(_) => "evaluation",
            Error::Analysis(_) | Error::UndefinedAuc => "analysis",
            Error::TooFewUsers { .. } => "too-few-users",
        }
    }
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::InvalidShape(msg.into())
}
