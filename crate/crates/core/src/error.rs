use num_complex::Complex64;
use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training infeasible: {0}")]
    TrainingInfeasible(String),

    #[error("Zadoff-Chu root {root} is not coprime with length {len}")]
    NonCoprimeRoot { root: u64, len: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("path-gain solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    GainSolverDiverged { iterations: usize, gradient_norm: f64, last: Vec<Complex64> },

    #[error("{context}: {source}")]
    Trial {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("TOML error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("CSV error at {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
