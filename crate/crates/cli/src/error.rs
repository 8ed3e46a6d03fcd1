use std::path::Path;

/// Command failure, carrying its exit code class.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    /// Artifacts built from different configurations or data.
    #[error("{0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] nskernel::Error),
}

impl CliError {
    /// 1 usage or configuration, 2 data, 3 artifact mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Mismatch(_) => 3,
            CliError::Data(_) | CliError::Io { .. } | CliError::Json { .. } => 2,
            CliError::Core(e) => match e {
                nskernel::Error::Config(_) => 1,
                nskernel::Error::Mismatch(_) => 3,
                _ => 2,
            },
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn json(path: &Path, source: serde_json::Error) -> CliError {
        CliError::Json {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
