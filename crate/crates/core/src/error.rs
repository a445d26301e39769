use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal has {got} samples but a window needs {needed}; no windows can be produced")]
    SignalTooShort { needed: usize, got: usize },

    #[error("input length {len} is not a multiple of {multiple} (required for {levels}-level decomposition)")]
    NotDivisible { len: usize, multiple: usize, levels: usize },

    #[error("feature {feature} needs at least {min} samples, got {got}")]
    FeatureTooShort {
        feature: &'static str,
        min: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("architecture mismatch: operation needs {expected}, model is {got}")]
    ArchMismatch { expected: &'static str, got: &'static str },

    #[error("sequential inputs need {needed} windows but only {available} are available")]
    NotEnoughWindows { needed: usize, available: usize },

    #[error("signal length {length_ms} ms is unsupported: {reason}")]
    UnsupportedLength { length_ms: f64, reason: String },

    #[error("training diverged at epoch {epoch} (loss = {loss}); try a lower learning rate")]
    Diverged { epoch: usize, loss: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("model format error: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}
