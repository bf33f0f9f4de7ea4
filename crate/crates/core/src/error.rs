use thiserror::Error;

use crate::trajectory::Flag;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {constraint}")]
    Invalid { field: String, constraint: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown model `{0}` (expected dct-friction, dct-owc, dbt-simple or dbt-full)")]
    UnknownModel(String),

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error("singular elimination: {0}")]
    Singular(String),

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("event location failed in step starting at t = {t} s")]
    EventLocation { t: f64 },

    #[error("integration diverged at t = {t} s")]
    Integration { t: f64 },

    #[error("commanded ramp on clutch {clutch} needs {required} N·m/s, limit is {limit} N·m/s")]
    RateLimit { clutch: usize, required: f64, limit: f64 },

    #[error("requested speed-phase overspeed {requested} rad/s is unreachable (max {reachable} rad/s)")]
    DeltaMUnreachable { requested: f64, reachable: f64 },

    #[error("trajectory cannot be constructed: {reason}")]
    Unconstructible { reason: String, flag: Flag },

    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), constraint: constraint.into() }
    }
}
