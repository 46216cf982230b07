use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI and the C ABI to pick an exit/status code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Runtime,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    BadCell { row: usize, column: String, value: String },

    #[error("row {row}: treatment must be 0 or 1, got `{value}`")]
    BadTreatment { row: usize, value: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no {0} units in the sample")]
    EmptyArm(Arm),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("outcome is not binary (values outside {{0, 1}})")]
    NonBinaryOutcome,

    #[error("zero events in the {0} arm")]
    ZeroEvents(Arm),

    #[error("{0} arm mean is zero; variance undefined")]
    ZeroArmMean(Arm),

    #[error("logistic MLE did not converge after {iterations} iterations (score norm {score_norm:e})")]
    NonConvergence { iterations: usize, score_norm: f64 },

    #[error("perfect separation detected: coefficient norm diverged to {coef_norm:e}")]
    Separation { coef_norm: f64 },

    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Treated,
    Control,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Arm::Treated => f.write_str("treated"),
            Arm::Control => f.write_str("control"),
        }
    }
}

impl Error {
    pub fn context(self, ctx: impl Into<String>) -> Error {
        Error::Context {
            context: ctx.into(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Csv(_)
            | Error::Empty(_)
            | Error::MissingColumn(_)
            | Error::BadCell { .. }
            | Error::BadTreatment { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::NonBinaryOutcome
            | Error::ZeroEvents(_)
            | Error::EmptyArm(_) => ErrorClass::Validation,
            Error::ZeroArmMean(_)
            | Error::NonConvergence { .. }
            | Error::Separation { .. }
            | Error::RankDeficient { .. }
            | Error::Singular(_) => ErrorClass::Runtime,
            Error::Context { source, .. } => source.class(),
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
