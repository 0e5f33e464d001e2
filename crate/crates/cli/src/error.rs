use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] cdhf_core::Error),
    #[error("missing {what} {path}; run `cdhf {hint}` first")]
    MissingInput {
        what: &'static str,
        path: PathBuf,
        hint: &'static str,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Check(String),
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(cdhf_core::Error::from(e))
            }
        }
    )*};
}

via_core!(
    cdhf_core::telemetry::TelemetryError,
    cdhf_core::simulator::SimulationError,
    cdhf_core::features::FeatureError,
    cdhf_core::models::ModelError,
    cdhf_core::policy::PolicyError,
    cdhf_core::eval::EvalError
);

pub type Result<T> = std::result::Result<T, CliError>;
