use humpty_core::oracle::OracleError;
use humpty_core::params::{ConfigError, ValidationReport};
use humpty_core::phase::PhaseError;
use humpty_core::trajectories::TimeOutOfRange;
use serde::Serialize;
use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(#[from] ValidationReport),
    #[error("{0}")]
    Usage(String),
    #[error("malformed expectations file: {0}")]
    Expectations(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Invalid(_)
            | CliError::Usage(_)
            | CliError::Expectations(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::Invalid(_) | CliError::Usage(_) => "validation",
            CliError::Expectations(_) => "expectations",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON report for standard error.
    pub fn report(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
            violations: Vec<String>,
        }
        let violations = match self {
            CliError::Invalid(r) | CliError::Config(ConfigError::Invalid(r)) => r
                .violations
                .iter()
                .map(|v| format!("{}: {}", v.field, v.message))
                .collect(),
            _ => Vec::new(),
        };
        let report = Report {
            error: self.kind(),
            message: self.to_string(),
            violations,
        };
        serde_json::to_string(&report).expect("plain report serializes")
    }
}

impl From<PhaseError> for CliError {
    fn from(e: PhaseError) -> Self {
        match e {
            PhaseError::Invalid(r) => CliError::Invalid(r),
            PhaseError::Time(t) => t.into(),
        }
    }
}

impl From<TimeOutOfRange> for CliError {
    fn from(e: TimeOutOfRange) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Invalid(r) => CliError::Invalid(r),
            OracleError::UnderResolved(msg) => {
                CliError::Usage(format!("grid under-resolved: {msg}"))
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}
