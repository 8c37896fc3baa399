use std::path::{Path, PathBuf};

use lqg_latent_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type HarnessResult<T> = Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        HarnessError::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 validation, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(e) if e.is_numerical() => 2,
            HarnessError::Core(_) | HarnessError::Validation(_) => 1,
            HarnessError::Io { .. } | HarnessError::Format { .. } => 3,
        }
    }

    /// Short machine-readable class used in result rows.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Core(CoreError::Validation(_)) | HarnessError::Validation(_) => "validation",
            HarnessError::Core(CoreError::Conditioning { .. }) => "conditioning",
            HarnessError::Core(CoreError::Generation(_)) => "generation",
            HarnessError::Core(CoreError::Discovery(_)) => "discovery",
            HarnessError::Core(CoreError::FeatureCap { .. }) => "feature_cap",
            HarnessError::Io { .. } | HarnessError::Format { .. } => "io",
        }
    }
}
