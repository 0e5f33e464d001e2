use thiserror::Error;

use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::models::ModelError;
use crate::policy::PolicyError;
use crate::simulator::SimulationError;
use crate::telemetry::TelemetryError;

/// Crate-level error; each variant names the module that failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("telemetry: {0}")]
    Telemetry(#[from] TelemetryError),
    #[error("simulator: {0}")]
    Simulation(#[from] SimulationError),
    #[error("features: {0}")]
    Features(#[from] FeatureError),
    #[error("models: {0}")]
    Model(#[from] ModelError),
    #[error("policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
