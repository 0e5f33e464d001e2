use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::features::TrainingDataset;
use crate::models::{auroc, train_tree_ensemble, TreeParams};
use crate::seed::substream;

/// Rows of each class required to train a point.
pub const MIN_CLASS_ROWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub fraction: f64,
    pub rows: usize,
    /// Mean over the seeds that produced a point.
    pub auroc: f64,
    pub auroc_min: f64,
    pub auroc_max: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleComplexityCurve {
    pub points: Vec<SamplePoint>,
    /// Fractions left out because a class had too few rows.
    pub skipped: Vec<f64>,
}

impl SampleComplexityCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fraction,rows,auroc,auroc_min,auroc_max,runs\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.fraction, p.rows, p.auroc, p.auroc_min, p.auroc_max, p.runs
            ));
        }
        s
    }
}

/// Trains a tree ensemble on a seeded subsample of `train` for each
/// fraction and seed and scores it on `eval`. For one seed the subsamples are
/// nested prefixes of a single permutation. Fraction 1 uses every row in the
/// original order, is always included and is trained once.
pub fn sample_complexity_curve(
    fractions: &[f64],
    train: &TrainingDataset,
    params: &TreeParams,
    eval: &TrainingDataset,
    seeds: &[u64],
) -> Result<SampleComplexityCurve, EvalError> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(EvalError::InvalidFraction(*f));
    }
    let seeds: &[u64] = if seeds.is_empty() { &[0] } else { seeds };
    let mut fr: Vec<f64> = fractions.to_vec();
    if !fr.contains(&1.0) {
        fr.push(1.0);
    }
    fr.sort_by(f64::total_cmp);
    fr.dedup();
    let perms: Vec<Vec<usize>> = seeds
        .iter()
        .map(|&s| {
            let mut perm: Vec<usize> = (0..train.len()).collect();
            perm.shuffle(&mut substream(s, "sample-complexity"));
            perm
        })
        .collect();
    let jobs: Vec<(usize, Option<usize>)> = fr
        .iter()
        .enumerate()
        .flat_map(|(i, &f)| {
            let per_seed: Vec<(usize, Option<usize>)> = if f == 1.0 {
                vec![(i, None)]
            } else {
                (0..seeds.len()).map(|k| (i, Some(k))).collect()
            };
            per_seed
        })
        .collect();

    let results: Vec<Result<Option<(usize, f64)>, EvalError>> = jobs
        .par_iter()
        .map(|&(i, seed_index)| {
            let f = fr[i];
            let rows: Vec<usize> = match seed_index {
                None => (0..train.len()).collect(),
                Some(k) => {
                    let n = (f * train.len() as f64).round() as usize;
                    let mut idx = perms[k][..n].to_vec();
                    idx.sort_unstable();
                    idx
                }
            };
            let sub = train.subset(&rows);
            let pos = sub.positives();
            if pos < MIN_CLASS_ROWS || sub.len() - pos < MIN_CLASS_ROWS {
                log::warn!("sample complexity: fraction {f} has {pos} accepts of {} rows; skipped", sub.len());
                return Ok(None);
            }
            let model = train_tree_ensemble(&sub, params)?;
            let scores = model.predict_dataset(eval)?;
            Ok(Some((sub.len(), auroc(&scores, &eval.labels)?)))
        })
        .collect();
    let mut per_fraction: Vec<Vec<(usize, f64)>> = vec![Vec::new(); fr.len()];
    for (&(i, _), r) in jobs.iter().zip(results) {
        if let Some(p) = r? {
            per_fraction[i].push(p);
        }
    }
    let mut curve = SampleComplexityCurve::default();
    for (f, runs) in fr.iter().zip(per_fraction) {
        if runs.is_empty() {
            curve.skipped.push(*f);
            continue;
        }
        let aucs: Vec<f64> = runs.iter().map(|r| r.1).collect();
        curve.points.push(SamplePoint {
            fraction: *f,
            rows: runs[0].0,
            auroc: aucs.iter().sum::<f64>() / aucs.len() as f64,
            auroc_min: aucs.iter().copied().fold(f64::INFINITY, f64::min),
            auroc_max: aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            runs: aucs.len(),
        });
    }
    Ok(curve)
}
