use serde::{Deserialize, Serialize};

use super::ModelError;

fn check(scores: &[f64], labels: &[u8]) -> Result<(u64, u64), ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::LengthMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(ModelError::NonFinite(*s));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(ModelError::SingleClass);
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half. Computed from tie-averaged ranks in integer
/// arithmetic, so it equals [`auroc_pairwise`] exactly.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, ModelError> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives; a tie group occupying 1-based ranks
    // a+1..=b has doubled midrank a+1+b.
    let mut rank2: u128 = 0;
    let mut a = 0;
    while a < order.len() {
        let mut b = a + 1;
        while b < order.len() && scores[order[b]] == scores[order[a]] {
            b += 1;
        }
        let p = order[a..b].iter().filter(|&&i| labels[i] == 1).count() as u128;
        rank2 += p * (a as u128 + 1 + b as u128);
        a = b;
    }
    let u2 = rank2 - u128::from(pos) * u128::from(pos + 1);
    Ok(u2 as f64 / (2 * u128::from(pos) * u128::from(neg)) as f64)
}

/// Brute-force AU-ROC over all positive/negative pairs. Quadratic; meant
/// as a reference for small inputs.
pub fn auroc_pairwise(scores: &[f64], labels: &[u8]) -> Result<f64, ModelError> {
    let (pos, neg) = check(scores, labels)?;
    let mut count2: u128 = 0;
    for (i, &sp) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sn) in scores.iter().enumerate() {
            if labels[j] == 1 {
                continue;
            }
            if sp > sn {
                count2 += 2;
            } else if sp == sn {
                count2 += 1;
            }
        }
    }
    Ok(count2 as f64 / (2 * u128::from(pos) * u128::from(neg)) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_predicted: f64,
    pub empirical_rate: f64,
    pub count: usize,
}

fn bin_index(s: f64, n_bins: usize) -> usize {
    ((s * n_bins as f64).floor().max(0.0) as usize).min(n_bins - 1)
}

/// Non-empty equal-width bins on [0, 1]; a score of exactly 1 falls in the
/// last bin.
pub fn reliability_bins(scores: &[f64], labels: &[u8], n_bins: usize) -> Vec<ReliabilityBin> {
    let n_bins = n_bins.max(1);
    let mut sum = vec![0.0; n_bins];
    let mut pos = vec![0usize; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&s, &y) in scores.iter().zip(labels) {
        let b = bin_index(s, n_bins);
        sum[b] += s;
        pos[b] += usize::from(y == 1);
        count[b] += 1;
    }
    (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| ReliabilityBin {
            lower: b as f64 / n_bins as f64,
            upper: (b + 1) as f64 / n_bins as f64,
            mean_predicted: sum[b] / count[b] as f64,
            empirical_rate: pos[b] as f64 / count[b] as f64,
            count: count[b],
        })
        .collect()
}

/// Expected calibration error with `n_bins` equal-width bins.
pub fn ece(scores: &[f64], labels: &[u8], n_bins: usize) -> f64 {
    let n = scores.len().min(labels.len());
    if n == 0 {
        return 0.0;
    }
    reliability_bins(scores, labels, n_bins)
        .iter()
        .map(|b| b.count as f64 / n as f64 * (b.mean_predicted - b.empirical_rate).abs())
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub n: usize,
    pub positives: usize,
    pub threshold: f64,
    pub auroc: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub ece: f64,
    pub reliability_bins: Vec<ReliabilityBin>,
}

impl ClassifierMetrics {
    pub fn to_text(&self) -> String {
        format!(
            "rows {}\npositives {}\nthreshold {}\nauroc {:.6}\naccuracy {:.6}\nmacro_f1 {:.6}\nece {:.6}\n",
            self.n, self.positives, self.threshold, self.auroc, self.accuracy, self.macro_f1, self.ece
        )
    }
}

fn f1(tp: usize, fp: usize, fneg: usize) -> f64 {
    let d = 2 * tp + fp + fneg;
    if d == 0 {
        0.0
    } else {
        2.0 * tp as f64 / d as f64
    }
}

/// Accept is predicted when the score exceeds `threshold`.
pub fn classification_report(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ClassifierMetrics, ModelError> {
    let auroc = auroc(scores, labels)?;
    let (mut tp, mut tn, mut fp, mut fneg) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s > threshold, y == 1) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
        }
    }
    let n = scores.len();
    Ok(ClassifierMetrics {
        n,
        positives: tp + fneg,
        threshold,
        auroc,
        accuracy: (tp + tn) as f64 / n as f64,
        macro_f1: 0.5 * (f1(tp, fp, fneg) + f1(tn, fneg, fp)),
        ece: ece(scores, labels, 10),
        reliability_bins: reliability_bins(scores, labels, 10),
    })
}
