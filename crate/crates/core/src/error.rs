use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("corpus generation failed: {0}")]
    Generation(String),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    /// Short stable identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidAudio(_) => "invalid-audio",
            Error::ShapeMismatch { .. } => "shape-mismatch",
            Error::TrainingDiverged { .. } => "training-diverged",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Generation(_) => "generation",
            Error::InvalidCorpus(_) => "invalid-corpus",
            Error::Numerical(_) => "numerical",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
