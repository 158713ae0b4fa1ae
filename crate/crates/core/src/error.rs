use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the scoring pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("train error: {0}")]
    Train(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergence undefined: p[{index}] = {p} > 0 but q[{index}] = 0")]
    DivergenceUndefined { index: usize, p: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Whether the error stems from bad input data (as opposed to I/O or internal failures).
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
