use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] roadnoise_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed WAV: {msg}", path.display())]
    WavFormat { path: PathBuf, msg: String },
    #[error("{}: unsupported WAV encoding: {msg}", path.display())]
    UnsupportedCodec { path: PathBuf, msg: String },
    #[error("{}: WAV data chunk holds no samples", path.display())]
    EmptyInput { path: PathBuf },
    #[error("{}: {msg}", path.display())]
    Json { path: PathBuf, msg: String },
    #[error("{}: {msg}", path.display())]
    FileFormat { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable identifier printed in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(e) => e.kind(),
            Error::Io { .. } => "io",
            Error::WavFormat { .. } => "format",
            Error::UnsupportedCodec { .. } => "unsupported-codec",
            Error::EmptyInput { .. } => "empty-input",
            Error::Json { .. } => "json",
            Error::FileFormat { .. } => "file-format",
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, msg: impl Into<String>) -> Self {
        Error::FileFormat {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}
