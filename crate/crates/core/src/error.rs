use std::path::PathBuf;

use lidf_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LidError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("training diverged at epoch {epoch}, batch {batch} (loss {loss})")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<LidError>,
    },
    #[error("no completed trials to report")]
    EmptyReport,
    #[error("search space is infeasible: {0}")]
    InfeasibleSpace(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, LidError>;

impl LidError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LidError::Io { path: path.into(), source }
    }

    /// Innermost error, looking through fold annotations.
    pub fn root(&self) -> &LidError {
        match self {
            LidError::Fold { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self.root(), LidError::Diverged { .. })
    }

    /// Process exit code: 2 usage/config, 3 divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            LidError::Diverged { .. } => 3,
            LidError::Io { .. } | LidError::Parse { .. } | LidError::UnsupportedFormat(_) => 4,
            _ => 2,
        }
    }
}
