//! Std companion to `xmodal-core`: file formats, WAV decoding, run
//! configuration, the synthetic fixture generator, report rendering, and
//! the pipeline stages behind the `xmodal` binary.
//!
//! The split keeps every numeric decision in the core crate; this crate
//! only moves bytes between disk and the core APIs, so each stage's output
//! is a pure function of its input files and the run configuration.

pub mod config;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod wav;

use std::fmt;
use std::io;
use std::path::Path;

/// Stage failure with a process exit code per the CLI contract:
/// 2 config, 3 missing dependency, 4 data.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing configuration value; the key names the culprit.
    Config { key: String, message: String },
    /// A pipeline artifact this stage needs is absent.
    MissingDependency { stage: String, hint: String },
    /// Input or cached data is unreadable or violates an invariant.
    Data(String),
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> CliError {
        CliError::Config { key: key.to_string(), message: message.into() }
    }

    pub fn missing(stage: &str, hint: &str) -> CliError {
        CliError::MissingDependency { stage: stage.to_string(), hint: hint.to_string() }
    }

    pub fn data(message: impl Into<String>) -> CliError {
        CliError::Data(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::MissingDependency { .. } => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { key, message } => write!(f, "config error ({key}): {message}"),
            CliError::MissingDependency { stage, hint } => {
                write!(f, "missing dependency ({stage}): {hint}")
            }
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(format!("io: {e}"))
    }
}

/// Io error annotated with the path it happened on.
pub fn io_at(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("io: {}: {e}", path.display()))
}
