use thiserror::Error;

pub type Result<T> = std::result::Result<T, CensurvError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CensurvError {
    #[error("dataset contains no uncensored failures")]
    NoEvents,

    #[error("no non-events: every subject is an event")]
    NoNonEvents,

    #[error("covariate index {index} out of range for {p} covariates")]
    BadIndex { index: usize, p: usize },

    #[error("insufficient data: need {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected} covariates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("Newton iterations did not converge after {iterations} steps (gradient max-norm {gradient:e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("singular information matrix: {0}")]
    SingularInformation(String),

    #[error("correlation {0} outside [0, 1)")]
    BadRho(f64),

    #[error("unknown scenario variant `{0}`")]
    UnknownVariant(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed model document at `{field}`: {message}")]
    Format { field: String, message: String },
}

impl CensurvError {
    /// Short machine-readable category, used by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Self::NoEvents => "NoEvents",
            Self::NoNonEvents => "NoNonEvents",
            Self::BadIndex { .. } => "BadIndex",
            Self::InsufficientData { .. } => "InsufficientData",
            Self::DimensionMismatch { .. } => "DimensionMismatch",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::TooFew { .. } => "TooFew",
            Self::NotConverged { .. } => "NotConverged",
            Self::SingularInformation(_) => "SingularInformation",
            Self::BadRho(_) => "BadRho",
            Self::UnknownVariant(_) => "UnknownVariant",
            Self::InvalidData(_) => "InvalidData",
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::Format { .. } => "FormatError",
        }
    }

    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Format {
            field: field.into(),
            message: message.into(),
        }
    }
}
