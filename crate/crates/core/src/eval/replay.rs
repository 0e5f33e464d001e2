use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::features::FeatureExtractor;
use crate::models::AcceptanceModel;
use crate::policy::{
    decide, AcceptanceScorer, DecisionKind, DecisionRequest, ModelScorer, PolicyThresholds, ProvidedSuggestion,
};
use crate::telemetry::{label_pairs, TelemetryStore};

/// What the two-stage rule would have done on a logged test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v1: f64,
    pub v2: f64,
    pub events: usize,
    pub hidden_stage1: usize,
    pub hidden_stage1_rejects: usize,
    pub hidden_stage2: usize,
    pub hidden_stage2_rejects: usize,
    pub hidden_fraction: f64,
    pub stage1_hidden_fraction: f64,
    pub hidden_rejected_precision: Option<f64>,
    pub stage1_precision: Option<f64>,
    pub stage2_precision: Option<f64>,
    pub provider_calls: usize,
    /// Suggestions never generated because stage 1 hid them.
    pub provider_calls_saved: usize,
}

impl OperatingPoint {
    pub fn to_text(&self) -> String {
        let o = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.6}"));
        format!(
            "v1 {}\nv2 {}\nevents {}\nhidden_fraction {:.6}\nstage1_hidden_fraction {:.6}\nhidden_rejected_precision {}\nstage1_precision {}\nstage2_precision {}\nprovider_calls {}\nprovider_calls_saved {}\n",
            self.v1,
            self.v2,
            self.events,
            self.hidden_fraction,
            self.stage1_hidden_fraction,
            o(self.hidden_rejected_precision),
            o(self.stage1_precision),
            o(self.stage2_precision),
            self.provider_calls,
            self.provider_calls_saved
        )
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Replays every labeled shown event through [`decide`] with any scorer.
/// The provider hands back the logged suggestion and counts its calls.
pub fn replay_with_scorer<S: AcceptanceScorer + ?Sized>(
    thresholds: &PolicyThresholds,
    store: &TelemetryStore,
    scorer: &S,
) -> Result<OperatingPoint, EvalError> {
    let pairs = label_pairs(store);
    let calls = Cell::new(0usize);
    let (mut h1, mut h1r, mut h2, mut h2r) = (0, 0, 0, 0);
    for pair in &pairs {
        let shown = pair.shown();
        let request = DecisionRequest {
            programmer_id: &shown.programmer_id,
            timestamp_ms: shown.timestamp_ms,
            prompt: &shown.prompt,
            context: pair.context(),
        };
        let provider = |_: &DecisionRequest<'_>| {
            calls.set(calls.get() + 1);
            Ok(ProvidedSuggestion {
                text: shown.suggestion.clone(),
                confidence: shown.suggestion_confidence,
                latency_ms: 0.0,
            })
        };
        let reject = usize::from(pair.label.as_u8() == 0);
        match decide(scorer, thresholds, &request, &provider)?.kind() {
            DecisionKind::HiddenStage1 => {
                h1 += 1;
                h1r += reject;
            }
            DecisionKind::HiddenStage2 => {
                h2 += 1;
                h2r += reject;
            }
            DecisionKind::Shown => {}
        }
    }
    let n = pairs.len();
    let nf = n.max(1) as f64;
    Ok(OperatingPoint {
        v1: thresholds.v1,
        v2: thresholds.v2,
        events: n,
        hidden_stage1: h1,
        hidden_stage1_rejects: h1r,
        hidden_stage2: h2,
        hidden_stage2_rejects: h2r,
        hidden_fraction: (h1 + h2) as f64 / nf,
        stage1_hidden_fraction: h1 as f64 / nf,
        hidden_rejected_precision: ratio(h1r + h2r, h1 + h2),
        stage1_precision: ratio(h1r, h1),
        stage2_precision: ratio(h2r, h2),
        provider_calls: calls.get(),
        provider_calls_saved: n - calls.get(),
    })
}

/// Stage-1 and stage-2 models with their feature extractors.
pub struct StageModels<'a> {
    pub stage1: &'a AcceptanceModel,
    pub stage1_features: &'a FeatureExtractor,
    pub stage2: &'a AcceptanceModel,
    pub stage2_features: &'a FeatureExtractor,
}

/// Replays `test` through the trained models after checking that none of
/// its sessions were used to train either model.
pub fn retrospective_policy_eval(
    thresholds: &PolicyThresholds,
    test: &TelemetryStore,
    models: &StageModels<'_>,
) -> Result<OperatingPoint, EvalError> {
    let test_sessions = test.session_fingerprints();
    for m in [models.stage1, models.stage2] {
        let shared = m.metadata.training_sessions.intersection(&test_sessions).count();
        if shared > 0 {
            return Err(EvalError::PartitionOverlap { sessions: shared });
        }
    }
    let scorer = ModelScorer {
        stage1_model: models.stage1,
        stage1_features: models.stage1_features,
        stage2_model: models.stage2,
        stage2_features: models.stage2_features,
    };
    replay_with_scorer(thresholds, test, &scorer)
}
