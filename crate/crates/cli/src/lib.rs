//! Configuration-driven pipeline behind the `pdcsim` binary.
//!
//! A run goes crystal → joint spectral amplitude → analyses, writing one
//! CSV or JSON file per stage plus a `manifest.json` that lists every file
//! with its SHA-256 and the headline numbers.

pub mod config;
mod manifest;
mod pipeline;
mod validate;

pub use config::{Analysis, AnnealRequest, CrystalSpec, GridSpec, RunConfig, SCHEMA_VERSION};
pub use manifest::{FileEntry, Manifest};
pub use pipeline::{engineer, run, show_stack};
pub use validate::{validate, validate_path, Diagnostic};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Compute {
        stage: String,
        #[source]
        source: pdc_core::Error,
    },
    #[error("stage `{stage}`: cannot write {path}: {source}")]
    Output {
        stage: String,
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute { .. } | CliError::Output { .. } => 3,
        }
    }
}
