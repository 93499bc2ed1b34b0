use std::path::PathBuf;

use crate::circuit::Violation;

/// Errors produced across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid circuit: {}", format_violations(.0))]
    InvalidCircuit(Vec<Violation>),

    #[error("circuit depth {depth} exceeds cutoff {cutoff}")]
    TooDeep { depth: usize, cutoff: usize },

    #[error("invalid layered spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system too large for dense diagonalization: {n} qubits (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("sampler gave up after {attempts} attempts: {reason}")]
    ResampleBudget { attempts: usize, reason: String },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("idx format: {0}")]
    Idx(String),

    #[error("beam search: {0}")]
    Beam(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
