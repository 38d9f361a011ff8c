//! Batch experiment harness around the `fairaa` library.
//!
//! Four commands share one [`ExperimentConfig`]: `generate` writes a toy
//! dataset, `fit` trains one model, `evaluate` scores a saved model and
//! `compare` sweeps λ against the unconstrained baseline. Every output is a
//! pure function of the configuration, so reruns are byte-identical.

pub mod commands;
pub mod config;
pub mod plots;
pub mod svg;

use std::fmt;

pub use commands::{cmd_compare, cmd_evaluate, cmd_fit, cmd_generate, ComparisonReport, Delta, Entry, Experiment};
pub use config::{DatasetSpec, ExperimentConfig, ModelSpec, Overrides};

/// Failures that abort a command (exit code 2).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Data(fairaa::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fairaa::Error> for CliError {
    fn from(e: fairaa::Error) -> Self {
        match e {
            fairaa::Error::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Data(other),
        }
    }
}

/// How a command that did not abort finished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some λ in a sweep failed; the others were reported.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 1,
        }
    }
}

pub const EXIT_ERROR: i32 = 2;
