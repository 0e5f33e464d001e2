//! Acceptance classifiers: logistic regression and boosted trees, their
//! metrics, feature importance and the model file format.

mod gbdt;
mod logistic;
mod metrics;
mod persist;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureSchema, FeatureVector, TrainingDataset};
use crate::telemetry::TelemetryStore;

pub use gbdt::{fit_booster, Booster, Node, Objective, Tree, TreeParams};
pub use logistic::{fit_logistic, LogisticParams, LogisticWeights};
pub use metrics::{
    auroc, auroc_pairwise, classification_report, ece, reliability_bins, ClassifierMetrics, ReliabilityBin,
};
pub use persist::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT, MODEL_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data has a single class")]
    SingleClass,
    #[error("no rows")]
    EmptyInput,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("schema mismatch: model expects {expected}, vector has {actual}")]
    SchemaMismatch { expected: String, actual: String },
    #[error("operation needs a {expected} model, got {actual}")]
    WrongKind { expected: ModelKind, actual: ModelKind },
    #[error("model file checksum mismatch: recorded {recorded}, computed {computed}")]
    Checksum { recorded: String, computed: String },
    #[error("model file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logistic,
    TreeEnsemble,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Logistic => "logistic",
            ModelKind::TreeEnsemble => "tree-ensemble",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParameters {
    Logistic(LogisticWeights),
    TreeEnsemble(Booster),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub hyperparameters: BTreeMap<String, f64>,
    pub rows: usize,
    pub positives: usize,
    /// Training objective before any update and after each epoch or tree.
    pub loss_trace: Vec<f64>,
    /// Fingerprints of the sessions the rows came from.
    pub training_sessions: BTreeSet<u64>,
}

/// A trained P(accept | features) estimator bound to one feature schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceModel {
    pub kind: ModelKind,
    pub schema: FeatureSchema,
    pub schema_id: String,
    pub parameters: ModelParameters,
    pub metadata: TrainingMetadata,
}

impl AcceptanceModel {
    /// Probability on a raw row laid out by the model's schema. No schema
    /// check; the caller guarantees the layout.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.parameters {
            ModelParameters::Logistic(w) => w.predict(row),
            ModelParameters::TreeEnsemble(b) => b.predict(row),
        }
    }

    pub fn predict_proba(&self, v: &FeatureVector) -> Result<f64, ModelError> {
        if v.schema_id != self.schema_id {
            return Err(ModelError::SchemaMismatch {
                expected: self.schema_id.clone(),
                actual: v.schema_id.clone(),
            });
        }
        if v.values.len() != self.schema.arity() {
            return Err(ModelError::LengthMismatch {
                expected: self.schema.arity(),
                actual: v.values.len(),
            });
        }
        Ok(self.predict_row(&v.values))
    }

    /// Scores every row of a dataset built with the same schema.
    pub fn predict_dataset(&self, ds: &TrainingDataset) -> Result<Vec<f64>, ModelError> {
        if ds.schema_id != self.schema_id {
            return Err(ModelError::SchemaMismatch {
                expected: self.schema_id.clone(),
                actual: ds.schema_id.clone(),
            });
        }
        Ok((0..ds.len()).map(|i| self.predict_row(ds.row(i))).collect())
    }

    /// Records which sessions the model was trained on, for overlap checks.
    pub fn with_training_sessions(mut self, store: &TelemetryStore) -> Self {
        self.metadata.training_sessions = store.session_fingerprints();
        self
    }
}

fn targets(ds: &TrainingDataset) -> Result<Vec<f64>, ModelError> {
    if ds.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let pos = ds.positives();
    if pos == 0 || pos == ds.len() {
        return Err(ModelError::SingleClass);
    }
    Ok(ds.labels.iter().map(|&y| f64::from(y)).collect())
}

pub fn train_logistic(ds: &TrainingDataset, params: &LogisticParams) -> Result<AcceptanceModel, ModelError> {
    let y = targets(ds)?;
    let (w, trace) = fit_logistic(&ds.x, ds.n_features, &y, params)?;
    Ok(AcceptanceModel {
        kind: ModelKind::Logistic,
        schema: ds.schema.clone(),
        schema_id: ds.schema_id.clone(),
        parameters: ModelParameters::Logistic(w),
        metadata: TrainingMetadata {
            seed: params.seed,
            hyperparameters: BTreeMap::from([
                ("epochs".to_owned(), params.epochs as f64),
                ("l2".to_owned(), params.l2),
                ("learning_rate".to_owned(), params.learning_rate),
            ]),
            rows: ds.len(),
            positives: ds.positives(),
            loss_trace: trace,
            training_sessions: BTreeSet::new(),
        },
    })
}

pub fn train_tree_ensemble(ds: &TrainingDataset, params: &TreeParams) -> Result<AcceptanceModel, ModelError> {
    params.validate()?;
    let y = targets(ds)?;
    let (b, trace) = fit_booster(&ds.x, ds.n_features, &y, Objective::Logistic, params)?;
    Ok(AcceptanceModel {
        kind: ModelKind::TreeEnsemble,
        schema: ds.schema.clone(),
        schema_id: ds.schema_id.clone(),
        parameters: ModelParameters::TreeEnsemble(b),
        metadata: TrainingMetadata {
            seed: params.seed,
            hyperparameters: BTreeMap::from([
                ("l2".to_owned(), params.l2),
                ("learning_rate".to_owned(), params.learning_rate),
                ("max_depth".to_owned(), params.max_depth as f64),
                ("max_thresholds".to_owned(), params.max_thresholds as f64),
                ("min_rows_per_leaf".to_owned(), params.min_rows_per_leaf as f64),
                ("n_trees".to_owned(), params.n_trees as f64),
            ]),
            rows: ds.len(),
            positives: ds.positives(),
            loss_trace: trace,
            training_sessions: BTreeSet::new(),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: usize,
    pub name: String,
    pub split_count: usize,
}

/// Split counts per feature, most used first; features never split on are
/// left out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureImportanceReport {
    pub entries: Vec<FeatureImportance>,
}

impl FeatureImportanceReport {
    pub fn total_splits(&self) -> usize {
        self.entries.iter().map(|e| e.split_count).sum()
    }

    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("feature,name,split_count\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{}\n", e.feature, e.name, e.split_count));
        }
        s
    }
}

fn count_splits<'a>(trees: impl IntoIterator<Item = &'a Tree>, names: &[&str]) -> FeatureImportanceReport {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in trees {
        for f in t.split_features() {
            *counts.entry(f).or_default() += 1;
        }
    }
    let mut entries: Vec<FeatureImportance> = counts
        .into_iter()
        .map(|(feature, split_count)| FeatureImportance {
            feature,
            name: names.get(feature).map_or_else(|| format!("f{feature}"), |s| (*s).to_owned()),
            split_count,
        })
        .collect();
    entries.sort_by(|a, b| b.split_count.cmp(&a.split_count).then(a.feature.cmp(&b.feature)));
    FeatureImportanceReport { entries }
}

pub fn feature_importance(model: &AcceptanceModel) -> Result<FeatureImportanceReport, ModelError> {
    match &model.parameters {
        ModelParameters::TreeEnsemble(b) => {
            let names: Vec<&str> = model.schema.names().collect();
            Ok(count_splits(&b.trees, &names))
        }
        ModelParameters::Logistic(_) => Err(ModelError::WrongKind {
            expected: ModelKind::TreeEnsemble,
            actual: model.kind,
        }),
    }
}
