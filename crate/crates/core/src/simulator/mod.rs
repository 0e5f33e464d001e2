//! Synthetic programmer behaviour and the Monte-Carlo oracle.

mod cohort;
mod oracle;
mod profile;
mod state;
mod text;

use thiserror::Error;

pub use cohort::{
    calibrated_state_offset, simulate_cohort, write_annotations, GroundTruthAnnotation, SimulationConfig,
};
pub use oracle::{
    closed_form_delta, monte_carlo_time, threshold_time_curve, utility_parameters, verify_break_even,
    MeanEstimate, BreakEvenRow,
};
pub use profile::{ProgrammerProfile, TimeDistribution};
pub use state::LatentState;
pub use text::{SuggestionKind, TextConfig};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("{assumption} assumption violated: {detail}")]
    AssumptionViolated { assumption: &'static str, detail: String },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Telemetry(#[from] crate::telemetry::TelemetryError),
}
