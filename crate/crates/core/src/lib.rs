//! Conditional display of AI code suggestions.
//!
//! The crate decides when (and which) code suggestions to show a programmer by
//! thresholding learned acceptance probabilities. It contains:
//!
//! * [`telemetry`]: the interaction log model, its line-delimited file format,
//!   session segmentation and labeling.
//! * [`simulator`]: a latent-state programmer model that generates synthetic
//!   telemetry with ground-truth annotations and acts as a Monte-Carlo oracle
//!   for the utility identities.
//! * [`features`]: lexical scanning and fixed-schema feature extraction for the
//!   prompt-only (stage 1) and prompt+suggestion (stage 2) predictors.
//! * [`models`]: logistic regression and gradient-boosted trees, plus
//!   AU-ROC / ECE / F1 metrics and feature importance.
//! * [`policy`]: suggestion utility, the break-even acceptance probability,
//!   the two-stage show/hide rule and threshold selection.
//! * [`eval`]: splits, selective-prediction curves, threshold sweeps,
//!   retrospective replay, sample complexity and report emission.

pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod policy;
pub mod seed;
pub mod simulator;
pub mod telemetry;

pub use error::{Error, Result};
pub use features::{FeatureExtractor, FeatureSchema, FeatureVector, Stage, TrainingDataset};
pub use models::{AcceptanceModel, ClassifierMetrics, ModelKind};
pub use policy::{DisplayDecision, PolicyThresholds, UtilityParameters};
pub use simulator::{LatentState, ProgrammerProfile, SimulationConfig};
pub use telemetry::{ActionKind, SessionTrace, TelemetryEvent, TelemetryStore};
