use crate::space::Violation;

/// Errors produced anywhere in the search engine, the synthetic black box and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("configuration does not fit the space: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("history holds {got} trials, at least {needed} are required")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("cannot fit a density estimator without members")]
    EmptyMembers,

    #[error("models are defined over different parameter spaces")]
    SpaceMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("black-box evaluation failed: {0}")]
    Blackbox(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("malformed summary CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
