use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::features::TrainingDataset;
use crate::models::{fit_booster, Objective, TreeParams};
use crate::seed::substream;

pub const MIN_REGRESSION_ROWS: usize = 50;
const HELD_OUT_SHARE: f64 = 0.2;
const RIDGE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RegressionMethod {
    Linear,
    Trees(TreeParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub method: String,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Held-out R² relative to the held-out mean.
    pub r2: f64,
    /// Held-out R² of always predicting the training median.
    pub median_baseline_r2: f64,
}

impl RegressionReport {
    pub fn to_text(&self) -> String {
        format!(
            "method {}\ntrain_rows {}\ntest_rows {}\nr2 {:.6}\nmedian_baseline_r2 {:.6}\n",
            self.method, self.train_rows, self.test_rows, self.r2, self.median_baseline_r2
        )
    }
}

fn r2(pred: &[f64], y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sse: f64 = pred.iter().zip(y).map(|(p, v)| (p - v) * (p - v)).sum();
    if sst == 0.0 {
        if sse == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - sse / sst
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Ridge regression on standardized columns; returns a predictor.
fn fit_linear(x: &[f64], p: usize, y: &[f64]) -> Result<impl Fn(&[f64]) -> f64, EvalError> {
    let n = y.len();
    let mut mean = vec![0.0; p];
    let mut scale = vec![0.0; p];
    for row in x.chunks_exact(p) {
        for k in 0..p {
            mean[k] += row[k] / n as f64;
        }
    }
    for row in x.chunks_exact(p) {
        for k in 0..p {
            scale[k] += (row[k] - mean[k]).powi(2) / n as f64;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let z = DMatrix::from_fn(n, p, |i, k| (x[i * p + k] - mean[k]) / scale[k]);
    let mut gram = z.transpose() * &z;
    for k in 0..p {
        gram[(k, k)] += RIDGE * n as f64;
    }
    let rhs = z.transpose() * DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let w = gram
        .cholesky()
        .ok_or_else(|| EvalError::Regression("normal equations are not positive definite".into()))?
        .solve(&rhs);
    Ok(move |row: &[f64]| ybar + (0..p).map(|k| w[k] * (row[k] - mean[k]) / scale[k]).sum::<f64>())
}

/// Fits `y` on the rows of `x` with a seeded 80/20 split and reports the
/// held-out R² next to a constant-median baseline.
pub fn regression_r2(
    x: &[f64],
    n_features: usize,
    y: &[f64],
    method: &RegressionMethod,
    seed: u64,
) -> Result<RegressionReport, EvalError> {
    let n = y.len();
    if n < MIN_REGRESSION_ROWS {
        return Err(EvalError::TooFewRows {
            have: n,
            need: MIN_REGRESSION_ROWS,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, "regression-split"));
    let n_test = ((n as f64) * HELD_OUT_SHARE).round() as usize;
    let (test, train) = idx.split_at(n_test);
    let mut train = train.to_vec();
    train.sort_unstable();
    let mut test = test.to_vec();
    test.sort_unstable();
    let gather = |rows: &[usize]| -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(rows.len() * n_features);
        for &r in rows {
            xs.extend_from_slice(&x[r * n_features..(r + 1) * n_features]);
        }
        (xs, rows.iter().map(|&r| y[r]).collect())
    };
    let (xtr, ytr) = gather(&train);
    let (xte, yte) = gather(&test);
    let pred: Vec<f64> = match method {
        RegressionMethod::Linear => {
            let f = fit_linear(&xtr, n_features, &ytr)?;
            xte.chunks_exact(n_features).map(f).collect()
        }
        RegressionMethod::Trees(params) => {
            let (b, _) = fit_booster(&xtr, n_features, &ytr, Objective::SquaredError, params)?;
            xte.chunks_exact(n_features).map(|r| b.predict(r)).collect()
        }
    };
    let med = median(&ytr);
    Ok(RegressionReport {
        method: match method {
            RegressionMethod::Linear => "linear".into(),
            RegressionMethod::Trees(_) => "trees".into(),
        },
        train_rows: train.len(),
        test_rows: test.len(),
        r2: r2(&pred, &yte),
        median_baseline_r2: r2(&vec![med; yte.len()], &yte),
    })
}

/// Regresses the seconds between display and the terminal action on the
/// dataset's features.
pub fn verification_time_regression(
    ds: &TrainingDataset,
    method: &RegressionMethod,
    seed: u64,
) -> Result<RegressionReport, EvalError> {
    let y: Vec<f64> = ds.meta.iter().map(|m| m.response_ms as f64 / 1000.0).collect();
    regression_r2(&ds.x, ds.n_features, &y, method, seed)
}
