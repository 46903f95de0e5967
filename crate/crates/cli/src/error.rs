use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{module} failed: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: meanfield::Error,
    },

    #[error("run directory integrity: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn numerical(module: &'static str) -> impl FnOnce(meanfield::Error) -> CliError {
        move |source| CliError::Numerical { module, source }
    }

    /// Process exit status: 2 for usage problems, 3 for numerical failures, 4 for integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::Integrity(_) => 4,
            CliError::Io(_) | CliError::Json(_) | CliError::Csv(_) => 5,
        }
    }
}
