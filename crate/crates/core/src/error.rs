use std::io;

use thiserror::Error;

pub type Result<T, E = DphError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DphError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("vocabulary is empty: no document produced any token")]
    EmptyVocabulary,

    #[error("split failed: {0}")]
    Split(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("infeasible dimensions: {0}")]
    Infeasible(String),

    #[error("solver invariant violated: {0}")]
    SolverInvariant(String),

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("bad file format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: u64,
        detail: String,
    },
}

impl DphError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        DphError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
