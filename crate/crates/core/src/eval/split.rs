use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::seed::substream;
use crate::telemetry::{SessionTrace, TelemetryStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    ByProgrammer,
    BySession,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// Train, validation and test shares.
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            mode: SplitMode::ByProgrammer,
            ratios: [0.7, 0.1, 0.2],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(EvalError::InvalidSplit("ratios must be positive".into()));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidSplit(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Splits `n` units by largest remainder: floors first, then the leftover
/// units go to the largest fractional parts (earlier partition on ties).
pub fn largest_remainder(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n.saturating_sub(sizes.iter().sum());
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[k] += 1;
        left -= 1;
    }
    sizes
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partitions {
    pub train: TelemetryStore,
    pub validation: TelemetryStore,
    pub test: TelemetryStore,
}

impl Partitions {
    pub fn parts(&self) -> [(&'static str, &TelemetryStore); 3] {
        [("train", &self.train), ("validation", &self.validation), ("test", &self.test)]
    }
}

/// Assigns programmers or sessions to train/validation/test. Units are
/// shuffled with the spec seed; each partition keeps the store's order.
pub fn split_dataset(store: &TelemetryStore, spec: &SplitSpec) -> Result<Partitions, EvalError> {
    spec.validate()?;
    let key = |s: &SessionTrace| -> String {
        match spec.mode {
            SplitMode::ByProgrammer => s.programmer_id.clone(),
            SplitMode::BySession => format!("{}\u{1f}{}", s.programmer_id, s.session_index),
        }
    };
    let mut units: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for s in store.sessions() {
        let k = key(s);
        if seen.insert(k.clone()) {
            units.push(k);
        }
    }
    let sizes = largest_remainder(units.len(), &spec.ratios);
    if sizes.contains(&0) {
        return Err(EvalError::TooFewUnits {
            unit: match spec.mode {
                SplitMode::ByProgrammer => "programmers",
                SplitMode::BySession => "sessions",
            },
            have: units.len(),
            sizes,
        });
    }
    units.shuffle(&mut substream(spec.seed, "split"));
    let train: BTreeSet<&String> = units[..sizes[0]].iter().collect();
    let val: BTreeSet<&String> = units[sizes[0]..sizes[0] + sizes[1]].iter().collect();
    let mut parts: [Vec<SessionTrace>; 3] = Default::default();
    for s in store.sessions() {
        let k = key(s);
        let p = if train.contains(&k) {
            0
        } else if val.contains(&k) {
            1
        } else {
            2
        };
        parts[p].push(s.clone());
    }
    let [a, b, c] = parts;
    let wrap = |v| TelemetryStore::from_sessions(v, store.provenance()).map_err(EvalError::from);
    Ok(Partitions {
        train: wrap(a)?,
        validation: wrap(b)?,
        test: wrap(c)?,
    })
}
