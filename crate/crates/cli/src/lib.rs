//! Command-line front end: flat-text run configuration and execution.

pub mod config;
mod run;

pub use config::{parse_pairs, Command, ExperimentKind, Format, RunConfig, Value};
pub use run::{execute, Outcome};

/// Exit status for a run that worked but found a violated hypothesis.
pub const EXIT_VIOLATION: i32 = 2;
/// Exit status for operational failures.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] jumpsde::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}
