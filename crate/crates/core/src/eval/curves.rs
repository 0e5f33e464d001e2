use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::policy::{count_grid, ThresholdGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectivePoint {
    pub coverage_pct: u32,
    /// Number of most-confident events in the slice.
    pub count: usize,
    pub accuracy: f64,
}

/// Accuracy of `score > 0.5` on the most confident `c`% of events for
/// c = 1..=100. Confidence is `max(p, 1 - p)`; equal confidences keep input
/// order. The slice for coverage c holds `ceil(c * n / 100)` events.
pub fn selective_prediction_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<SelectivePoint>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Misaligned(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(EvalError::SingleClass);
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(EvalError::Misaligned(format!("score {s} is not a number")));
    }
    let n = scores.len();
    let conf = |p: f64| p.max(1.0 - p);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| conf(scores[b]).total_cmp(&conf(scores[a])).then(a.cmp(&b)));
    let mut correct = Vec::with_capacity(n + 1);
    correct.push(0usize);
    for &i in &order {
        let hit = (scores[i] > 0.5) == (labels[i] == 1);
        correct.push(correct.last().unwrap() + usize::from(hit));
    }
    Ok((1..=100u32)
        .map(|c| {
            let k = (c as usize * n).div_ceil(100).max(1);
            SelectivePoint {
                coverage_pct: c,
                count: k,
                accuracy: correct[k] as f64 / k as f64,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub v1: f64,
    pub v2: f64,
    pub hidden_fraction: f64,
    /// Share of hidden events that were rejected; `None` when nothing is hidden.
    pub hidden_rejected_precision: Option<f64>,
    pub stage1_hidden_fraction: f64,
    /// Acceptance rate among shown events; `None` when nothing is shown.
    pub shown_acceptance_rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    /// Row-major over the grid: v1 outer, v2 inner.
    pub points: Vec<TradeoffPoint>,
}

pub const TRADEOFF_CSV_HEADER: &str =
    "v1,v2,hidden_fraction,hidden_rejected_precision,stage1_hidden_fraction,shown_acceptance_rate";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TradeoffCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.points.len() + 1));
        s.push_str(TRADEOFF_CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.v1,
                p.v2,
                p.hidden_fraction,
                opt(p.hidden_rejected_precision),
                p.stage1_hidden_fraction,
                opt(p.shown_acceptance_rate)
            ));
        }
        s
    }

    pub fn point(&self, v1: f64, v2: f64) -> Option<&TradeoffPoint> {
        self.points.iter().find(|p| p.v1 == v1 && p.v2 == v2)
    }
}

/// Hidden fraction, hidden-rejected precision, stage-1 share and shown
/// acceptance for every (v1, v2) of the grid.
pub fn sweep_thresholds(
    stage1: &[f64],
    stage2: &[f64],
    labels: &[u8],
    grid: &ThresholdGrid,
) -> Result<TradeoffCurve, EvalError> {
    let counts = count_grid(stage1, stage2, labels, grid)?;
    Ok(TradeoffCurve {
        points: counts
            .iter()
            .map(|(t, c)| TradeoffPoint {
                v1: t.v1,
                v2: t.v2,
                hidden_fraction: c.hidden_fraction(),
                hidden_rejected_precision: c.hidden_precision(),
                stage1_hidden_fraction: c.stage1_hidden_fraction(),
                shown_acceptance_rate: c.shown_acceptance_rate(),
            })
            .collect(),
    })
}

pub fn selective_csv(points: &[SelectivePoint]) -> String {
    let mut s = String::from("coverage_pct,count,accuracy\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.coverage_pct, p.count, p.accuracy));
    }
    s
}
