//! Gradient-boosted regression trees with Newton leaf values.
//!
//! Candidate split points are at most 255 quantile thresholds per feature,
//! fixed once before boosting. Every candidate is evaluated exactly from
//! per-node sums, so training is deterministic and independent of the
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Loss being boosted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Logistic,
    SquaredError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_rows_per_leaf: usize,
    /// L2 penalty on leaf values.
    pub l2: f64,
    /// Upper bound on candidate thresholds per feature (at most 255).
    pub max_thresholds: usize,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_rows_per_leaf: 20,
            l2: 1.0,
            max_thresholds: 255,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidHyperparameter(m.to_owned()));
        if self.n_trees < 1 {
            return bad("n_trees must be at least 1");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.min_rows_per_leaf < 1 {
            return bad("min_rows_per_leaf must be at least 1");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if !(1..=255).contains(&self.max_thresholds) {
            return bad("max_thresholds must be in 1..=255");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// One regression tree; the root is `nodes[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    fn scale_leaves(&mut self, eta: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= eta;
            }
        }
    }
}

/// An additive ensemble. Leaf values already include the shrinkage applied
/// when each tree was added.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub objective: Objective,
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl Booster {
    /// Sum of the base score and every tree output (a logit for the
    /// logistic objective).
    pub fn raw(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.objective {
            Objective::Logistic => sigmoid(self.raw(row)),
            Objective::SquaredError => self.raw(row),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn mean_loss(objective: Objective, raw: &[f64], y: &[f64]) -> f64 {
    let s: f64 = match objective {
        Objective::Logistic => raw.iter().zip(y).map(|(&f, &t)| softplus(f) - t * f).sum(),
        Objective::SquaredError => raw.iter().zip(y).map(|(&f, &t)| 0.5 * (f - t) * (f - t)).sum(),
    };
    s / raw.len() as f64
}

/// Column-major bin indices plus the threshold table they refer to.
struct Binned {
    thresholds: Vec<Vec<f64>>,
    cols: Vec<Vec<u8>>,
    /// Features with at least one candidate threshold.
    active: Vec<usize>,
}

fn candidate_thresholds(values: &mut [f64], max_thresholds: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let Some(&max) = values.last() else {
        return Vec::new();
    };
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.dedup();
    if distinct.len() <= max_thresholds + 1 {
        distinct.pop();
        return distinct;
    }
    let mut out: Vec<f64> = (1..=max_thresholds)
        .map(|k| values[(k * n / (max_thresholds + 1)).min(n - 1)])
        .filter(|&v| v < max)
        .collect();
    out.dedup();
    out
}

impl Binned {
    fn new(x: &[f64], n_rows: usize, n_features: usize, max_thresholds: usize) -> Self {
        let per_feature: Vec<(Vec<f64>, Vec<u8>)> = (0..n_features)
            .into_par_iter()
            .map(|f| {
                let col: Vec<f64> = (0..n_rows).map(|r| x[r * n_features + f]).collect();
                let mut sorted = col.clone();
                let thr = candidate_thresholds(&mut sorted, max_thresholds);
                let bins = col
                    .iter()
                    .map(|&v| thr.partition_point(|&t| t < v) as u8)
                    .collect();
                (thr, bins)
            })
            .collect();
        let active = per_feature
            .iter()
            .enumerate()
            .filter(|(_, (t, _))| !t.is_empty())
            .map(|(f, _)| f)
            .collect();
        let (thresholds, cols) = per_feature.into_iter().unzip();
        Self {
            thresholds,
            cols,
            active,
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Acc {
    g: f64,
    h: f64,
    n: u32,
}

impl Acc {
    fn sub(self, o: Acc) -> Acc {
        Acc {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

/// One histogram per active feature, in `Binned::active` order.
type Histograms = Vec<Vec<Acc>>;

fn histograms(b: &Binned, rows: &[u32], g: &[f64], h: &[f64]) -> Histograms {
    b.active
        .par_iter()
        .map(|&f| {
            let mut hist = vec![Acc::default(); b.thresholds[f].len() + 1];
            let col = &b.cols[f];
            for &r in rows {
                let r = r as usize;
                let a = &mut hist[col[r] as usize];
                a.g += g[r];
                a.h += h[r];
                a.n += 1;
            }
            hist
        })
        .collect()
}

fn subtract(parent: &Histograms, child: &Histograms) -> Histograms {
    parent
        .iter()
        .zip(child)
        .map(|(p, c)| p.iter().zip(c).map(|(&a, &b)| a.sub(b)).collect())
        .collect()
}

struct SplitChoice {
    feature: usize,
    bin: usize,
    gain: f64,
}

fn score(g: f64, h: f64, l2: f64) -> f64 {
    let d = h + l2;
    if d <= 0.0 {
        0.0
    } else {
        g * g / d
    }
}

fn best_split(b: &Binned, hists: &Histograms, total: Acc, params: &TreeParams) -> Option<SplitChoice> {
    let min = params.min_rows_per_leaf as u32;
    if total.n < 2 * min {
        return None;
    }
    let parent = score(total.g, total.h, params.l2);
    let per_feature: Vec<Option<SplitChoice>> = b
        .active
        .par_iter()
        .zip(hists.par_iter())
        .map(|(&f, hist)| {
            let mut left = Acc::default();
            let mut best: Option<SplitChoice> = None;
            for (j, a) in hist.iter().enumerate().take(hist.len() - 1) {
                left.g += a.g;
                left.h += a.h;
                left.n += a.n;
                if left.n < min {
                    continue;
                }
                let right = total.sub(left);
                if right.n < min {
                    break;
                }
                let gain = score(left.g, left.h, params.l2) + score(right.g, right.h, params.l2) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|s| gain > s.gain) {
                    best = Some(SplitChoice { feature: f, bin: j, gain });
                }
            }
            best
        })
        .collect();
    // Sequential reduction in feature order keeps ties stable.
    let mut best: Option<SplitChoice> = None;
    for c in per_feature.into_iter().flatten() {
        if best.as_ref().is_none_or(|s| c.gain > s.gain) {
            best = Some(c);
        }
    }
    best
}

fn totals(rows: &[u32], g: &[f64], h: &[f64]) -> Acc {
    let mut a = Acc::default();
    for &r in rows {
        a.g += g[r as usize];
        a.h += h[r as usize];
        a.n += 1;
    }
    a
}

struct Pending {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    hists: Option<Histograms>,
}

/// Grows one tree on gradients `g` and hessians `h`. Returns the tree and,
/// for each training row, the index of the leaf it lands in.
fn grow_tree(b: &Binned, g: &[f64], h: &[f64], n_rows: usize, params: &TreeParams) -> (Tree, Vec<usize>) {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut leaf_of = vec![0usize; n_rows];
    let mut stack = vec![Pending {
        node: 0,
        depth: 0,
        rows: (0..n_rows as u32).collect(),
        hists: None,
    }];
    while let Some(p) = stack.pop() {
        let total = totals(&p.rows, g, h);
        let leaf = |nodes: &mut Vec<Node>, leaf_of: &mut Vec<usize>| {
            nodes[p.node] = Node::Leaf {
                value: -total.g / (total.h + params.l2).max(f64::MIN_POSITIVE),
            };
            for &r in &p.rows {
                leaf_of[r as usize] = p.node;
            }
        };
        if p.depth >= params.max_depth {
            leaf(&mut nodes, &mut leaf_of);
            continue;
        }
        let hists = p.hists.unwrap_or_else(|| histograms(b, &p.rows, g, h));
        let Some(split) = best_split(b, &hists, total, params) else {
            leaf(&mut nodes, &mut leaf_of);
            continue;
        };
        let col = &b.cols[split.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            p.rows.iter().partition(|&&r| col[r as usize] as usize <= split.bin);
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[p.node] = Node::Split {
            feature: split.feature,
            threshold: b.thresholds[split.feature][split.bin],
            left: l,
            right: r,
        };
        let depth = p.depth + 1;
        let (left_h, right_h) = if depth < params.max_depth {
            // Build the smaller child's histograms; the larger one is the
            // parent minus the smaller.
            if left_rows.len() <= right_rows.len() {
                let small = histograms(b, &left_rows, g, h);
                let large = subtract(&hists, &small);
                (Some(small), Some(large))
            } else {
                let small = histograms(b, &right_rows, g, h);
                let large = subtract(&hists, &small);
                (Some(large), Some(small))
            }
        } else {
            (None, None)
        };
        stack.push(Pending {
            node: r,
            depth,
            rows: right_rows,
            hists: right_h,
        });
        stack.push(Pending {
            node: l,
            depth,
            rows: left_rows,
            hists: left_h,
        });
    }
    (Tree { nodes }, leaf_of)
}

/// Boosts `params.n_trees` trees on row-major `x`. Returns the ensemble and
/// the mean training loss before the first tree and after each tree; the
/// trace never increases because each tree's step is halved until the loss
/// does not go up.
pub fn fit_booster(
    x: &[f64],
    n_features: usize,
    y: &[f64],
    objective: Objective,
    params: &TreeParams,
) -> Result<(Booster, Vec<f64>), ModelError> {
    params.validate()?;
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
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite(*v));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let base_score = match objective {
        Objective::Logistic => {
            if mean <= 0.0 || mean >= 1.0 {
                return Err(ModelError::SingleClass);
            }
            (mean / (1.0 - mean)).ln()
        }
        Objective::SquaredError => mean,
    };
    let binned = Binned::new(x, n, n_features, params.max_thresholds);
    let mut raw = vec![base_score; n];
    let mut loss = mean_loss(objective, &raw, y);
    let mut trace = vec![loss];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut candidate = vec![0.0; n];
    for _ in 0..params.n_trees {
        for i in 0..n {
            match objective {
                Objective::Logistic => {
                    let p = sigmoid(raw[i]);
                    g[i] = p - y[i];
                    h[i] = p * (1.0 - p);
                }
                Objective::SquaredError => {
                    g[i] = raw[i] - y[i];
                    h[i] = 1.0;
                }
            }
        }
        let (mut tree, leaf_of) = grow_tree(&binned, &g, &h, n, params);
        let leaf_value = |k: usize| match tree.nodes[k] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("rows only land in leaves"),
        };
        let mut eta = params.learning_rate;
        let mut accepted = false;
        for _ in 0..30 {
            for i in 0..n {
                candidate[i] = raw[i] + eta * leaf_value(leaf_of[i]);
            }
            let l = mean_loss(objective, &candidate, y);
            if l <= loss {
                loss = l;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if accepted {
            std::mem::swap(&mut raw, &mut candidate);
            tree.scale_leaves(eta);
        } else {
            tree.scale_leaves(0.0);
        }
        trace.push(loss);
        trees.push(tree);
    }
    Ok((
        Booster {
            objective,
            base_score,
            learning_rate: params.learning_rate,
            n_features,
            trees,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn xor(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            x.extend([a, b]);
            y.push(if (a > 0.0) != (b > 0.0) { 1.0 } else { 0.0 });
        }
        (x, y)
    }

    #[test]
    fn thresholds_are_capped_and_exclude_max() {
        let mut v: Vec<f64> = (0..1000).map(f64::from).collect();
        let t = candidate_thresholds(&mut v, 255);
        assert!(t.len() <= 255 && !t.is_empty());
        assert!(t.iter().all(|&x| x < 999.0));
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        let mut few = vec![3.0, 1.0, 2.0, 2.0];
        assert_eq!(candidate_thresholds(&mut few, 255), vec![1.0, 2.0]);
        assert!(candidate_thresholds(&mut [5.0, 5.0], 255).is_empty());
    }

    #[test]
    fn bins_agree_with_threshold_comparison() {
        let (x, _) = xor(300, 3);
        let b = Binned::new(&x, 300, 2, 16);
        for f in 0..2 {
            for r in 0..300 {
                for (j, &t) in b.thresholds[f].iter().enumerate() {
                    assert_eq!(b.cols[f][r] as usize <= j, x[r * 2 + f] <= t);
                }
            }
        }
    }

    #[test]
    fn loss_trace_never_increases() {
        let (x, y) = xor(400, 1);
        let params = TreeParams {
            n_trees: 50,
            max_depth: 2,
            learning_rate: 0.8,
            min_rows_per_leaf: 5,
            ..TreeParams::default()
        };
        let (_, trace) = fit_booster(&x, 2, &y, Objective::Logistic, &params).unwrap();
        assert_eq!(trace.len(), 51);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace[50] < trace[0] * 0.5);
    }

    #[test]
    fn single_leaf_when_no_split_is_possible() {
        let x = vec![1.0; 40];
        let y: Vec<f64> = (0..40).map(|i| f64::from(i % 4 == 0)).collect();
        let (m, _) = fit_booster(&x, 1, &y, Objective::Logistic, &TreeParams::default()).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        assert!((m.raw(&[1.0]) - (0.25f64 / 0.75).ln()).abs() < 1e-12);
    }

    #[test]
    fn min_rows_per_leaf_respected() {
        let (x, y) = xor(400, 2);
        let params = TreeParams {
            n_trees: 3,
            max_depth: 6,
            min_rows_per_leaf: 30,
            ..TreeParams::default()
        };
        let binned = Binned::new(&x, 400, 2, params.max_thresholds);
        let g: Vec<f64> = y.iter().map(|&t| 0.5 - t).collect();
        let h = vec![0.25; 400];
        let (tree, leaf_of) = grow_tree(&binned, &g, &h, 400, &params);
        for (k, n) in tree.nodes.iter().enumerate() {
            if matches!(n, Node::Leaf { .. }) {
                assert!(leaf_of.iter().filter(|&&l| l == k).count() >= 30);
            }
        }
        for r in 0..400 {
            let mut k = 0;
            while let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = tree.nodes[k]
            {
                k = if x[r * 2 + feature] <= threshold { left } else { right };
            }
            assert_eq!(k, leaf_of[r]);
        }
    }

    #[test]
    fn squared_error_fits_a_step() {
        let x: Vec<f64> = (0..200).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 100.0 { 1.0 } else { 5.0 }).collect();
        let params = TreeParams {
            n_trees: 100,
            learning_rate: 0.3,
            l2: 0.0,
            ..TreeParams::default()
        };
        let (m, trace) = fit_booster(&x, 1, &y, Objective::SquaredError, &params).unwrap();
        assert!(trace.last().unwrap() < &1e-6);
        assert!((m.predict(&[10.0]) - 1.0).abs() < 1e-3);
        assert!((m.predict(&[150.0]) - 5.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = TreeParams::default();
        assert!(matches!(
            fit_booster(&[1.0, 2.0], 1, &[1.0, 1.0], Objective::Logistic, &p),
            Err(ModelError::SingleClass)
        ));
        assert!(matches!(
            fit_booster(&[1.0], 1, &[1.0, 0.0], Objective::Logistic, &p),
            Err(ModelError::LengthMismatch { .. })
        ));
        let zero = TreeParams { n_trees: 0, ..p.clone() };
        assert!(fit_booster(&[1.0, 2.0], 1, &[1.0, 0.0], Objective::Logistic, &zero).is_err());
        let shallow = TreeParams { max_depth: 0, ..p };
        assert!(fit_booster(&[1.0, 2.0], 1, &[1.0, 0.0], Objective::Logistic, &shallow).is_err());
    }
}
