use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] nearcrit::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {reason}")]
    Csv { path: PathBuf, row: usize, reason: String },
    #[error("audit failed for {dir}: {reason}")]
    Audit { dir: PathBuf, reason: String },
}

impl CliError {
    /// Whether the failure is a problem with the experiment description.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            CliError::Config(_)
                | CliError::Model(nearcrit::Error::InvalidParameter(_))
                | CliError::Model(nearcrit::Error::ConditionFailed(_))
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
