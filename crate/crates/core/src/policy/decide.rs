use serde::{Deserialize, Serialize};

use super::{PolicyError, PolicyThresholds};
use crate::features::FeatureExtractor;
use crate::models::AcceptanceModel;
use crate::telemetry::{ActionKind, TelemetryEvent};

/// An evaluation point: the prompt at the cursor and what happened earlier
/// in the session.
#[derive(Clone, Copy, Debug)]
pub struct DecisionRequest<'a> {
    pub programmer_id: &'a str,
    pub timestamp_ms: u64,
    pub prompt: &'a str,
    pub context: &'a [TelemetryEvent],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvidedSuggestion {
    pub text: String,
    pub confidence: f64,
    /// Generation latency reported by the provider.
    pub latency_ms: f64,
}

/// Source of suggestions (a language model in production; a log replay or
/// the simulator here). Only called once stage 1 lets the event through.
pub trait SuggestionProvider {
    fn provide(&self, request: &DecisionRequest<'_>) -> Result<ProvidedSuggestion, PolicyError>;
}

impl<F> SuggestionProvider for F
where
    F: Fn(&DecisionRequest<'_>) -> Result<ProvidedSuggestion, PolicyError>,
{
    fn provide(&self, request: &DecisionRequest<'_>) -> Result<ProvidedSuggestion, PolicyError> {
        self(request)
    }
}

/// Acceptance probabilities before and after the suggestion is known.
pub trait AcceptanceScorer {
    fn stage1(&self, request: &DecisionRequest<'_>) -> Result<f64, PolicyError>;
    fn stage2(&self, request: &DecisionRequest<'_>, suggestion: &ProvidedSuggestion) -> Result<f64, PolicyError>;
}

/// Scores with a trained stage-1 and stage-2 model pair.
pub struct ModelScorer<'a> {
    pub stage1_model: &'a AcceptanceModel,
    pub stage1_features: &'a FeatureExtractor,
    pub stage2_model: &'a AcceptanceModel,
    pub stage2_features: &'a FeatureExtractor,
}

impl ModelScorer<'_> {
    fn event(request: &DecisionRequest<'_>, suggestion: Option<&ProvidedSuggestion>) -> TelemetryEvent {
        TelemetryEvent {
            event_id: u64::MAX,
            timestamp_ms: request.timestamp_ms,
            action: ActionKind::Shown,
            prompt: request.prompt.to_owned(),
            suggestion: suggestion.map(|s| s.text.clone()).unwrap_or_default(),
            suggestion_confidence: suggestion.map_or(0.0, |s| s.confidence),
            programmer_id: request.programmer_id.to_owned(),
        }
    }

    fn score(
        model: &AcceptanceModel,
        features: &FeatureExtractor,
        event: &TelemetryEvent,
        context: &[TelemetryEvent],
    ) -> Result<f64, PolicyError> {
        let v = features
            .extract(event, context)
            .map_err(|e| PolicyError::Scoring(e.to_string()))?;
        model.predict_proba(&v).map_err(|e| PolicyError::Scoring(e.to_string()))
    }
}

impl AcceptanceScorer for ModelScorer<'_> {
    fn stage1(&self, request: &DecisionRequest<'_>) -> Result<f64, PolicyError> {
        let e = Self::event(request, None);
        Self::score(self.stage1_model, self.stage1_features, &e, request.context)
    }

    fn stage2(&self, request: &DecisionRequest<'_>, suggestion: &ProvidedSuggestion) -> Result<f64, PolicyError> {
        let e = Self::event(request, Some(suggestion));
        Self::score(self.stage2_model, self.stage2_features, &e, request.context)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    HiddenStage1,
    HiddenStage2,
    Shown,
}

/// Result of the two-stage rule. The stage-2 probability exists exactly when
/// the event got past stage 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DisplayDecision {
    HiddenStage1 { stage1_prob: f64 },
    HiddenStage2 { stage1_prob: f64, stage2_prob: f64, suggestion: ProvidedSuggestion },
    Shown { stage1_prob: f64, stage2_prob: f64, suggestion: ProvidedSuggestion },
}

impl DisplayDecision {
    pub fn kind(&self) -> DecisionKind {
        match self {
            DisplayDecision::HiddenStage1 { .. } => DecisionKind::HiddenStage1,
            DisplayDecision::HiddenStage2 { .. } => DecisionKind::HiddenStage2,
            DisplayDecision::Shown { .. } => DecisionKind::Shown,
        }
    }

    pub fn stage1_prob(&self) -> f64 {
        match *self {
            DisplayDecision::HiddenStage1 { stage1_prob }
            | DisplayDecision::HiddenStage2 { stage1_prob, .. }
            | DisplayDecision::Shown { stage1_prob, .. } => stage1_prob,
        }
    }

    pub fn stage2_prob(&self) -> Option<f64> {
        match *self {
            DisplayDecision::HiddenStage1 { .. } => None,
            DisplayDecision::HiddenStage2 { stage2_prob, .. } | DisplayDecision::Shown { stage2_prob, .. } => {
                Some(stage2_prob)
            }
        }
    }

    pub fn suggestion(&self) -> Option<&ProvidedSuggestion> {
        match self {
            DisplayDecision::HiddenStage1 { .. } => None,
            DisplayDecision::HiddenStage2 { suggestion, .. } | DisplayDecision::Shown { suggestion, .. } => {
                Some(suggestion)
            }
        }
    }

    pub fn is_hidden(&self) -> bool {
        !matches!(self, DisplayDecision::Shown { .. })
    }

    pub fn audit(&self, event_id: Option<u64>) -> AuditRecord {
        AuditRecord {
            event_id,
            stage1_prob: self.stage1_prob(),
            stage2_prob: self.stage2_prob(),
            decision: self.kind(),
            provider_latency_ms: self.suggestion().map(|s| s.latency_ms),
        }
    }
}

/// One line of the decision audit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub event_id: Option<u64>,
    pub stage1_prob: f64,
    pub stage2_prob: Option<f64>,
    pub decision: DecisionKind,
    pub provider_latency_ms: Option<f64>,
}

/// The two-stage rule. Stage 1 scores the prompt alone; at or below `v1`
/// the suggestion is never generated. Otherwise the provider is called,
/// stage 2 scores the suggestion, and at or below `v2` it is hidden.
pub fn decide<S, P>(
    scorer: &S,
    thresholds: &PolicyThresholds,
    request: &DecisionRequest<'_>,
    provider: &P,
) -> Result<DisplayDecision, PolicyError>
where
    S: AcceptanceScorer + ?Sized,
    P: SuggestionProvider + ?Sized,
{
    thresholds.validate()?;
    let stage1_prob = scorer.stage1(request)?;
    if stage1_prob <= thresholds.v1 {
        return Ok(DisplayDecision::HiddenStage1 { stage1_prob });
    }
    let suggestion = provider.provide(request)?;
    let stage2_prob = scorer.stage2(request, &suggestion)?;
    Ok(if stage2_prob <= thresholds.v2 {
        DisplayDecision::HiddenStage2 {
            stage1_prob,
            stage2_prob,
            suggestion,
        }
    } else {
        DisplayDecision::Shown {
            stage1_prob,
            stage2_prob,
            suggestion,
        }
    })
}
