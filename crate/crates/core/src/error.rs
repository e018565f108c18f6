use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate vector: norm {norm:e} is not positive")]
    DegenerateVector { norm: f64 },

    #[error("{model} diverged during {stage} at epoch {epoch}: loss is {loss}")]
    Divergence {
        model: String,
        stage: &'static str,
        epoch: usize,
        loss: f64,
    },

    #[error("index out of range: {what} {index} (size {size})")]
    Lookup {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config line {line}: unknown key `{key}`{}", suggestion_suffix(.suggestion))]
    UnknownKey {
        line: usize,
        key: String,
        suggestion: Option<String>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

fn suggestion_suffix(suggestion: &Option<String>) -> String {
    match suggestion {
        Some(s) => format!(" (did you mean `{s}`?)"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors raised while reading or checking the experiment
    /// configuration, before any data was processed.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::ConfigSyntax { .. } | Error::UnknownKey { .. } | Error::Config(_) => true,
            Error::Stage { stage, source } => *stage == "validate" || source.is_validation(),
            _ => false,
        }
    }
}
