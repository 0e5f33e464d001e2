//! Retrospective evaluation: splits, curves, threshold sweeps, replay of the
//! display rule over logged events, sample complexity and reports.

mod curves;
mod regression;
mod replay;
mod report;
mod sample;
mod split;

use thiserror::Error;

use crate::features::FeatureError;
use crate::models::ModelError;
use crate::policy::PolicyError;
use crate::telemetry::TelemetryError;

pub use curves::{
    selective_csv, selective_prediction_curve, sweep_thresholds, SelectivePoint, TradeoffCurve, TradeoffPoint,
    TRADEOFF_CSV_HEADER,
};
pub use regression::{
    regression_r2, verification_time_regression, RegressionMethod, RegressionReport, MIN_REGRESSION_ROWS,
};
pub use replay::{replay_with_scorer, retrospective_policy_eval, OperatingPoint, StageModels};
pub use report::{emit_report, sha256_hex, Artifacts, Manifest, MANIFEST_FILE};
pub use sample::{sample_complexity_curve, SampleComplexityCurve, SamplePoint, MIN_CLASS_ROWS};
pub use split::{largest_remainder, split_dataset, Partitions, SplitMode, SplitSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("{have} {unit} cannot fill three partitions (sizes {sizes:?})")]
    TooFewUnits {
        unit: &'static str,
        have: usize,
        sizes: Vec<usize>,
    },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
    #[error("{sessions} test sessions were used to train a model")]
    PartitionOverlap { sessions: usize },
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("{have} rows, at least {need} required")]
    TooFewRows { have: usize, need: usize },
    #[error("regression: {0}")]
    Regression(String),
    #[error("artifact name `{0}` is not a relative path inside the report")]
    InvalidArtifact(String),
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}
