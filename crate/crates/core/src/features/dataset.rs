use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureExtractor, FeatureSchema, FeatureVector};
use crate::telemetry::{label_pairs, TelemetryStore};

/// Where a dataset row came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub event_id: u64,
    pub programmer_id: String,
    pub session_index: u32,
    /// Milliseconds from display to the terminal action.
    pub response_ms: u64,
}

/// Labeled feature rows stored as a row-major matrix. Label 1 is accept.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingDataset {
    pub schema: FeatureSchema,
    pub schema_id: String,
    pub n_features: usize,
    pub x: Vec<f64>,
    pub labels: Vec<u8>,
    pub meta: Vec<RowMeta>,
}

impl TrainingDataset {
    /// Assembles a dataset from raw parts; mostly useful for synthetic data.
    pub fn from_rows(schema: FeatureSchema, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self, FeatureError> {
        let n_features = schema.arity();
        if rows.len() != labels.len() {
            return Err(FeatureError::InvalidSchema("row and label counts differ".into()));
        }
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(FeatureError::InvalidSchema("row arity differs from schema".into()));
        }
        let meta = (0..rows.len())
            .map(|i| RowMeta {
                event_id: i as u64,
                programmer_id: String::new(),
                session_index: 0,
                response_ms: 0,
            })
            .collect();
        Ok(Self {
            schema_id: schema.schema_id(),
            schema,
            n_features,
            x: rows.into_iter().flatten().collect(),
            labels,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            values: self.row(i).to_vec(),
            schema_id: self.schema_id.clone(),
        }
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.positives() as f64 / self.len() as f64
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        Self {
            schema: self.schema.clone(),
            schema_id: self.schema_id.clone(),
            n_features: self.n_features,
            x,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta: indices.iter().map(|&i| self.meta[i].clone()).collect(),
        }
    }

    /// CSV with header `event_id,label,<feature names>`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), FeatureError> {
        write!(out, "event_id,label")?;
        for name in self.schema.names() {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for i in 0..self.len() {
            write!(out, "{},{}", self.meta[i].event_id, self.labels[i])?;
            for v in self.row(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// One row per labeled shown event, in store order. Each row only sees the
/// events that precede it in its session.
pub fn build_dataset(store: &TelemetryStore, extractor: &FeatureExtractor) -> Result<TrainingDataset, FeatureError> {
    let pairs = label_pairs(store);
    if pairs.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    let rows: Vec<Result<Vec<f64>, FeatureError>> = pairs
        .par_iter()
        .map(|p| {
            let mut v = Vec::with_capacity(extractor.schema().arity());
            extractor.extract_into(p.shown(), p.context(), &mut v)?;
            Ok(v)
        })
        .collect();
    let mut x = Vec::with_capacity(pairs.len() * extractor.schema().arity());
    for r in rows {
        x.extend(r?);
    }
    Ok(TrainingDataset {
        schema: extractor.schema().clone(),
        schema_id: extractor.schema_id().to_owned(),
        n_features: extractor.schema().arity(),
        x,
        labels: pairs.iter().map(|p| p.label.as_u8()).collect(),
        meta: pairs
            .iter()
            .map(|p| RowMeta {
                event_id: p.shown().event_id,
                programmer_id: p.session.programmer_id.clone(),
                session_index: p.session.session_index,
                response_ms: p.response_ms(),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureStage, Stage};
    use crate::telemetry::{parse_log_str, IngestOptions};

    const LOG: &str = concat!(
        r#"{"ts_ms":0,"action":"shown","prompt":"import nu","suggestion":"mpy","confidence":0.9,"programmer_id":"u1"}"#, "\n",
        r#"{"ts_ms":800,"action":"accepted","prompt":"import nu","suggestion":"mpy","confidence":0.9,"programmer_id":"u1"}"#, "\n",
        r#"{"ts_ms":5000,"action":"shown","prompt":"x = (","suggestion":")","confidence":0.1,"programmer_id":"u1"}"#, "\n",
        r#"{"ts_ms":5600,"action":"rejected","prompt":"x = (","suggestion":")","confidence":0.1,"programmer_id":"u1"}"#, "\n",
        r##"{"ts_ms":9000,"action":"shown","prompt":"# load","suggestion":"data = load()","confidence":0.4,"programmer_id":"u1"}"##, "\n",
        r##"{"ts_ms":9100,"action":"browsed","prompt":"# load","suggestion":"data = read()","confidence":0.4,"programmer_id":"u1"}"##, "\n",
        r##"{"ts_ms":9900,"action":"rejected","prompt":"# load","suggestion":"data = read()","confidence":0.4,"programmer_id":"u1"}"##, "\n",
        r#"{"ts_ms":12000,"action":"shown","prompt":"pending","suggestion":"x","confidence":0.4,"programmer_id":"u1"}"#, "\n",
    );

    #[test]
    fn three_labeled_rows() {
        let store = parse_log_str(LOG, &IngestOptions::default()).unwrap();
        let x = FeatureExtractor::for_stage(Stage::WithSuggestion);
        let ds = build_dataset(&store, &x).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels, vec![1, 0, 0]);
        assert_eq!(ds.meta.iter().map(|m| m.event_id).collect::<Vec<_>>(), vec![0, 2, 4]);
        assert_eq!(ds.meta[2].response_ms, 900);
        let mut csv = Vec::new();
        ds.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("event_id,label,prompt_chars,"));
    }

    #[test]
    fn stage1_has_no_suggestion_columns() {
        let store = parse_log_str(LOG, &IngestOptions::default()).unwrap();
        let ds = build_dataset(&store, &FeatureExtractor::for_stage(Stage::PromptOnly)).unwrap();
        assert!(ds.schema.features.iter().all(|f| f.stage == FeatureStage::Both));
        assert!(ds.schema.names().all(|n| !n.starts_with("suggestion")));
    }

    #[test]
    fn empty_label_set_errors() {
        let store = parse_log_str(
            r#"{"ts_ms":0,"action":"shown","prompt":"a","suggestion":"b","confidence":0.5,"programmer_id":"u"}"#,
            &IngestOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            build_dataset(&store, &FeatureExtractor::for_stage(Stage::PromptOnly)),
            Err(FeatureError::EmptyDataset)
        ));
    }

    #[test]
    fn later_events_do_not_change_earlier_rows() {
        let store = parse_log_str(LOG, &IngestOptions::default()).unwrap();
        let truncated: String = LOG.lines().take(4).map(|l| format!("{l}\n")).collect();
        let short = parse_log_str(&truncated, &IngestOptions::default()).unwrap();
        let x = FeatureExtractor::for_stage(Stage::WithSuggestion);
        let full = build_dataset(&store, &x).unwrap();
        let part = build_dataset(&short, &x).unwrap();
        assert_eq!(part.row(0), full.row(0));
        assert_eq!(part.row(1), full.row(1));
    }
}
