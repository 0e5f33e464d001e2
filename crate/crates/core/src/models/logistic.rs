use serde::{Deserialize, Serialize};

use super::gbdt::{sigmoid, softplus};
use super::ModelError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub l2: f64,
    pub epochs: usize,
    /// Initial step size; halved within an epoch whenever a step would raise
    /// the objective.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            epochs: 100,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

/// Weights over standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticWeights {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticWeights {
    pub fn logit(&self, row: &[f64]) -> f64 {
        let mut z = self.bias;
        for (k, &v) in row.iter().enumerate() {
            z += self.weights[k] * (v - self.mean[k]) / self.scale[k];
        }
        z
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        sigmoid(self.logit(row))
    }
}

fn objective(z: &[f64], y: &[f64], w: &[f64], l2: f64) -> f64 {
    let data: f64 = z.iter().zip(y).map(|(&f, &t)| softplus(f) - t * f).sum::<f64>() / z.len() as f64;
    data + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Full-batch gradient descent on the L2-penalized mean logistic loss.
/// Returns the weights and the objective before the first epoch and after
/// each epoch.
pub fn fit_logistic(
    x: &[f64],
    n_features: usize,
    y: &[f64],
    params: &LogisticParams,
) -> Result<(LogisticWeights, Vec<f64>), ModelError> {
    let n = y.len();
    if n == 0 {
        return Err(ModelError::EmptyInput);
    }
    if x.len() != n * n_features {
        return Err(ModelError::LengthMismatch {
            expected: n * n_features,
            actual: x.len(),
        });
    }
    if !(params.l2 >= 0.0 && params.learning_rate > 0.0) {
        return Err(ModelError::InvalidHyperparameter(
            "l2 must be non-negative and learning_rate positive".into(),
        ));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite(*v));
    }
    let positives = y.iter().filter(|&&t| t == 1.0).count();
    if positives == 0 || positives == n {
        return Err(ModelError::SingleClass);
    }

    let mut mean = vec![0.0; n_features];
    for row in x.chunks_exact(n_features) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut scale = vec![0.0; n_features];
    for row in x.chunks_exact(n_features) {
        for k in 0..n_features {
            let d = row[k] - mean[k];
            scale[k] += d * d;
        }
    }
    for s in &mut scale {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let z: Vec<f64> = x
        .chunks_exact(n_features)
        .flat_map(|row| (0..n_features).map(|k| (row[k] - mean[k]) / scale[k]).collect::<Vec<_>>())
        .collect();

    let logits = |w: &[f64], b: f64| -> Vec<f64> {
        z.chunks_exact(n_features)
            .map(|row| b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    };
    let mut w = vec![0.0; n_features];
    let mut b = 0.0;
    let mut f = logits(&w, b);
    let mut loss = objective(&f, y, &w, params.l2);
    let mut trace = vec![loss];
    let mut eta = params.learning_rate;
    for _ in 0..params.epochs {
        let mut gw: Vec<f64> = w.iter().map(|v| params.l2 * v).collect();
        let mut gb = 0.0;
        for (row, (&fi, &t)) in z.chunks_exact(n_features).zip(f.iter().zip(y)) {
            let r = (sigmoid(fi) - t) / n as f64;
            gb += r;
            for (g, &a) in gw.iter_mut().zip(row) {
                *g += r * a;
            }
        }
        let mut improved = false;
        for _ in 0..40 {
            let cw: Vec<f64> = w.iter().zip(&gw).map(|(v, g)| v - eta * g).collect();
            let cb = b - eta * gb;
            let cf = logits(&cw, cb);
            let cl = objective(&cf, y, &cw, params.l2);
            if cl <= loss {
                (w, b, f, loss) = (cw, cb, cf, cl);
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        trace.push(loss);
        if !improved {
            break;
        }
    }
    Ok((
        LogisticWeights {
            mean,
            scale,
            weights: w,
            bias: b,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn separable_set_is_fit_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut x = Vec::new();
        let mut y = Vec::new();
        while y.len() < 100 {
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = rng.random_range(-3.0..3.0);
            let m = a + 2.0 * b - 0.5;
            if m.abs() < 0.2 {
                continue;
            }
            x.extend([a, b]);
            y.push(f64::from(m > 0.0));
        }
        let params = LogisticParams {
            l2: 0.0,
            epochs: 2000,
            ..LogisticParams::default()
        };
        let (w, trace) = fit_logistic(&x, 2, &y, &params).unwrap();
        assert!(trace.windows(2).all(|p| p[1] <= p[0]));
        let correct = x
            .chunks_exact(2)
            .zip(&y)
            .filter(|(r, &t)| (w.predict(r) > 0.5) == (t == 1.0))
            .count();
        assert_eq!(correct, 100);
    }

    #[test]
    fn zero_epochs_gives_one_half() {
        let x = [1.0, 5.0, 2.0, 7.0, 3.0, 1.0];
        let y = [1.0, 0.0, 1.0];
        let params = LogisticParams {
            epochs: 0,
            ..LogisticParams::default()
        };
        let (w, trace) = fit_logistic(&x, 2, &y, &params).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(w.predict(&[100.0, -4.0]), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        let x = [1.0, 1.0, 1.0];
        assert!(matches!(
            fit_logistic(&x, 1, &[1.0, 1.0, 1.0], &LogisticParams::default()),
            Err(ModelError::SingleClass)
        ));
    }

    #[test]
    fn constant_feature_standardizes_to_zero() {
        let x = [4.0, 1.0, 4.0, 2.0, 4.0, 3.0, 4.0, 4.0];
        let y = [0.0, 0.0, 1.0, 1.0];
        let (w, _) = fit_logistic(&x, 2, &y, &LogisticParams::default()).unwrap();
        assert_eq!(w.scale[0], 1.0);
        assert_eq!(w.weights[0], 0.0);
        assert!(w.weights[1] > 0.0);
    }
}
