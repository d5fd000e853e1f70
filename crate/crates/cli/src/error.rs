use thiserror::Error;

use crate::scenario::ScenarioError;

/// Verified equilibrium, or a successful `gen`, `bench` or `info`.
pub const EXIT_OK: i32 = 0;
/// Unreadable input, bad usage, inapplicable method or shape mismatch.
pub const EXIT_INPUT: i32 = 1;
/// The integral game has no pure equilibrium.
pub const EXIT_NO_EQUILIBRIUM: i32 = 2;
/// Solver failure, or a profile that did not verify.
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("method {method} does not apply: {reason}")]
    Inapplicable { method: &'static str, reason: String },
    #[error("quantity vector has length {got}, scenario has {expected} edges")]
    Shape { expected: usize, got: usize },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver failed: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) => EXIT_FAILURE,
            _ => EXIT_INPUT,
        }
    }
}
