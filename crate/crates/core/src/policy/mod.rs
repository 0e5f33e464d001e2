//! The display policy: utility of a suggestion, the break-even acceptance
//! probability, the two-stage show/hide rule and threshold selection.

mod decide;
mod grid;
mod rank;
mod utility;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decide::{
    decide, AcceptanceScorer, AuditRecord, DecisionKind, DecisionRequest, DisplayDecision, ModelScorer,
    ProvidedSuggestion, SuggestionProvider,
};
pub use grid::{count_grid, select_thresholds, GridCell, GridCounts, ThresholdGrid, ThresholdSelection};
pub use rank::rank_suggestions;
pub use utility::{
    expected_time_shown, pstar, suggestion_utility, BreakEven, UtilityParameters, EQUAL_WRITING_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("invalid utility parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "writing after reject ({writing_given_reject_s}s) must exceed editing after accept ({editing_given_accept_s}s)"
    )]
    EditingNotFaster {
        writing_given_reject_s: f64,
        editing_given_accept_s: f64,
    },
    #[error(
        "writing after reject ({writing_given_reject_s}s) differs from writing without suggestion ({writing_not_shown_s}s)"
    )]
    UnequalWritingTimes {
        writing_given_reject_s: f64,
        writing_not_shown_s: f64,
    },
    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("target precision {0} outside (0.5, 1]")]
    InvalidTarget(f64),
    #[error("no candidate suggestions")]
    NoCandidates,
    #[error("score arrays misaligned: {0}")]
    Misaligned(String),
    #[error("invalid threshold grid: {0}")]
    InvalidGrid(String),
    #[error("suggestion provider failed: {0}")]
    Provider(String),
    #[error("scoring failed: {0}")]
    Scoring(String),
}

/// The pair of hide thresholds: hide at stage 1 when P(accept | prompt) <= v1,
/// otherwise hide at stage 2 when P(accept | prompt, suggestion) <= v2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyThresholds {
    pub v1: f64,
    pub v2: f64,
}

impl PolicyThresholds {
    pub fn new(v1: f64, v2: f64) -> Result<Self, PolicyError> {
        let t = Self { v1, v2 };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        for v in [self.v1, self.v2] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(PolicyError::ThresholdOutOfRange(v));
            }
        }
        Ok(())
    }
}

/// Policy configuration file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub thresholds: PolicyThresholds,
    #[serde(default)]
    pub utility: Option<UtilityParameters>,
    /// Whether the programmer is assumed to be waiting on the suggestion at
    /// an evaluation point when nothing else is known.
    #[serde(default = "default_expecting")]
    pub expecting_default: bool,
}

fn default_expecting() -> bool {
    true
}
