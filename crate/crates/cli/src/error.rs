use censurv::CensurvError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CensurvError),

    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },

    #[error("{file}: row {row}, column `{column}`: cannot parse {value:?}: {reason}")]
    UnparseableCell {
        file: String,
        row: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("covariates do not match the model: missing [{}], extra [{}]", missing.join(", "), extra.join(", "))]
    SchemaMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    /// A flag that is invalid on its own or in combination with others.
    #[error("{flag}: {message}")]
    Flag { flag: String, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            Self::Core(e) => e.category(),
            Self::MissingColumn { .. } => "MissingColumn",
            Self::UnparseableCell { .. } => "UnparseableCell",
            Self::SchemaMismatch { .. } => "SchemaMismatch",
            Self::Flag { .. } => "InvalidFlag",
            Self::Io { .. } => "Io",
            Self::Usage(_) => "Usage",
        }
    }

    pub fn flag(flag: &str, message: impl Into<String>) -> Self {
        Self::Flag {
            flag: flag.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
