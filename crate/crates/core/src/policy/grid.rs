//! Exact hidden/shown counts for every threshold pair of a grid.
//!
//! An event is hidden at stage 1 when its stage-1 score is `<= v1`, and at
//! stage 2 when it passes stage 1 and its stage-2 score is `<= v2`. Each event
//! is binned once by the first grid index that hides it; 2-D prefix sums then
//! give the counts for all pairs in O(n + |v1| * |v2|).

use serde::{Deserialize, Serialize};

use super::{PolicyError, PolicyThresholds};

/// Ascending candidate values for each threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

impl ThresholdGrid {
    /// `0, 1/steps, ..., 1` on both axes.
    pub fn uniform(steps: usize) -> Self {
        let axis: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        Self {
            v1: axis.clone(),
            v2: axis,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        for axis in [&self.v1, &self.v2] {
            if axis.is_empty() {
                return Err(PolicyError::InvalidGrid("empty axis".into()));
            }
            if axis.iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
                return Err(PolicyError::InvalidGrid("values must lie in [0, 1]".into()));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(PolicyError::InvalidGrid("values must be strictly ascending".into()));
            }
        }
        Ok(())
    }
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self::uniform(100)
    }
}

/// Counts at one grid point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub hidden_stage1: usize,
    pub hidden_stage1_rejects: usize,
    pub hidden_stage2: usize,
    pub hidden_stage2_rejects: usize,
    pub shown: usize,
    pub shown_accepts: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl GridCell {
    pub fn hidden(&self) -> usize {
        self.hidden_stage1 + self.hidden_stage2
    }

    pub fn hidden_rejects(&self) -> usize {
        self.hidden_stage1_rejects + self.hidden_stage2_rejects
    }

    pub fn total(&self) -> usize {
        self.hidden() + self.shown
    }

    pub fn hidden_fraction(&self) -> f64 {
        ratio(self.hidden(), self.total()).unwrap_or(0.0)
    }

    pub fn stage1_hidden_fraction(&self) -> f64 {
        ratio(self.hidden_stage1, self.total()).unwrap_or(0.0)
    }

    /// Fraction of hidden events that were in fact rejected.
    pub fn hidden_precision(&self) -> Option<f64> {
        ratio(self.hidden_rejects(), self.hidden())
    }

    pub fn stage1_precision(&self) -> Option<f64> {
        ratio(self.hidden_stage1_rejects, self.hidden_stage1)
    }

    pub fn stage2_precision(&self) -> Option<f64> {
        ratio(self.hidden_stage2_rejects, self.hidden_stage2)
    }

    pub fn shown_acceptance_rate(&self) -> Option<f64> {
        ratio(self.shown_accepts, self.shown)
    }
}

/// Counts for every (v1, v2) pair of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCounts {
    pub grid: ThresholdGrid,
    /// Row-major: `cells[i * v2.len() + j]` is the pair `(v1[i], v2[j])`.
    pub cells: Vec<GridCell>,
}

impl GridCounts {
    pub fn cell(&self, i: usize, j: usize) -> &GridCell {
        &self.cells[i * self.grid.v2.len() + j]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PolicyThresholds, &GridCell)> + '_ {
        let w = self.grid.v2.len();
        self.cells.iter().enumerate().map(move |(k, c)| {
            (
                PolicyThresholds {
                    v1: self.grid.v1[k / w],
                    v2: self.grid.v2[k % w],
                },
                c,
            )
        })
    }
}

fn first_hiding_index(axis: &[f64], score: f64) -> usize {
    axis.partition_point(|&v| v < score)
}

fn check_aligned(stage1: &[f64], stage2: &[f64], labels: &[u8]) -> Result<(), PolicyError> {
    if stage1.len() != stage2.len() || stage1.len() != labels.len() {
        return Err(PolicyError::Misaligned(format!(
            "stage1 {} / stage2 {} / labels {}",
            stage1.len(),
            stage2.len(),
            labels.len()
        )));
    }
    if let Some(s) = stage1.iter().chain(stage2).find(|s| s.is_nan()) {
        return Err(PolicyError::Misaligned(format!("score {s} is not a number")));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(PolicyError::Misaligned(format!("label {l} is not binary")));
    }
    Ok(())
}

/// Hidden/shown counts for all threshold pairs. Labels are 1 for accept.
pub fn count_grid(
    stage1: &[f64],
    stage2: &[f64],
    labels: &[u8],
    grid: &ThresholdGrid,
) -> Result<GridCounts, PolicyError> {
    grid.validate()?;
    check_aligned(stage1, stage2, labels)?;
    let (n1, n2) = (grid.v1.len(), grid.v2.len());
    // Bin counts: b1 in 0..=n1, b2 in 0..=n2 (index n means "never hidden").
    let w = n2 + 1;
    let mut all = vec![0usize; (n1 + 1) * w];
    let mut acc = vec![0usize; (n1 + 1) * w];
    for ((&s1, &s2), &y) in stage1.iter().zip(stage2).zip(labels) {
        let k = first_hiding_index(&grid.v1, s1) * w + first_hiding_index(&grid.v2, s2);
        all[k] += 1;
        acc[k] += usize::from(y);
    }
    // Cumulative over b2 within each b1 row.
    for row in 0..=n1 {
        for j in 1..w {
            all[row * w + j] += all[row * w + j - 1];
            acc[row * w + j] += acc[row * w + j - 1];
        }
    }
    let total = labels.len();
    let total_acc: usize = labels.iter().map(|&y| usize::from(y)).sum();
    let row_total = |row: usize, v: &Vec<usize>| v[row * w + n2];

    let mut cells = vec![GridCell::default(); n1 * n2];
    // Walk v1 from high to low so that "b1 > i" rows accumulate.
    let mut tail_all = vec![0usize; w];
    let mut tail_acc = vec![0usize; w];
    let mut h1_all: usize = (0..=n1).map(|r| row_total(r, &all)).sum();
    let mut h1_acc: usize = (0..=n1).map(|r| row_total(r, &acc)).sum();
    for i in (0..n1).rev() {
        let row = i + 1;
        for j in 0..w {
            tail_all[j] += all[row * w + j];
            tail_acc[j] += acc[row * w + j];
        }
        h1_all -= row_total(row, &all);
        h1_acc -= row_total(row, &acc);
        for j in 0..n2 {
            let hidden2 = tail_all[j];
            let hidden2_acc = tail_acc[j];
            let shown = total - h1_all - hidden2;
            let shown_acc = total_acc - h1_acc - hidden2_acc;
            cells[i * n2 + j] = GridCell {
                hidden_stage1: h1_all,
                hidden_stage1_rejects: h1_all - h1_acc,
                hidden_stage2: hidden2,
                hidden_stage2_rejects: hidden2 - hidden2_acc,
                shown,
                shown_accepts: shown_acc,
            };
        }
    }
    Ok(GridCounts {
        grid: grid.clone(),
        cells,
    })
}

/// Outcome of threshold selection on validation scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub thresholds: PolicyThresholds,
    pub feasible: bool,
    pub hidden_fraction: f64,
    pub stage1_hidden_fraction: f64,
    pub stage1_precision: Option<f64>,
    pub stage2_precision: Option<f64>,
    pub hidden_precision: Option<f64>,
}

/// Chooses the pair that hides the most events while at least
/// `target_hidden_precision` of the events hidden at each stage were
/// rejected. A stage that hides nothing meets the constraint trivially.
/// Ties in hidden count prefer higher overall precision, then smaller
/// thresholds. Returns `(0, 0)` flagged infeasible when no pair hides
/// anything under the constraint.
pub fn select_thresholds(
    stage1: &[f64],
    stage2: &[f64],
    labels: &[u8],
    target_hidden_precision: f64,
    grid: &ThresholdGrid,
) -> Result<ThresholdSelection, PolicyError> {
    if !(target_hidden_precision > 0.5 && target_hidden_precision <= 1.0) {
        return Err(PolicyError::InvalidTarget(target_hidden_precision));
    }
    let counts = count_grid(stage1, stage2, labels, grid)?;
    let meets = |p: Option<f64>| p.is_none_or(|p| p >= target_hidden_precision);
    let mut best: Option<(PolicyThresholds, &GridCell)> = None;
    for (t, cell) in counts.iter() {
        if cell.hidden() == 0 || !meets(cell.stage1_precision()) || !meets(cell.stage2_precision()) {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, b)) => {
                cell.hidden() > b.hidden()
                    || (cell.hidden() == b.hidden() && cell.hidden_precision() > b.hidden_precision())
            }
        };
        if better {
            best = Some((t, cell));
        }
    }
    Ok(match best {
        Some((t, c)) => ThresholdSelection {
            thresholds: t,
            feasible: true,
            hidden_fraction: c.hidden_fraction(),
            stage1_hidden_fraction: c.stage1_hidden_fraction(),
            stage1_precision: c.stage1_precision(),
            stage2_precision: c.stage2_precision(),
            hidden_precision: c.hidden_precision(),
        },
        None => ThresholdSelection {
            thresholds: PolicyThresholds { v1: 0.0, v2: 0.0 },
            feasible: false,
            hidden_fraction: 0.0,
            stage1_hidden_fraction: 0.0,
            stage1_precision: None,
            stage2_precision: None,
            hidden_precision: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(stage1: &[f64], stage2: &[f64], labels: &[u8], t: PolicyThresholds) -> GridCell {
        let mut c = GridCell::default();
        for ((&a, &b), &y) in stage1.iter().zip(stage2).zip(labels) {
            if a <= t.v1 {
                c.hidden_stage1 += 1;
                c.hidden_stage1_rejects += usize::from(y == 0);
            } else if b <= t.v2 {
                c.hidden_stage2 += 1;
                c.hidden_stage2_rejects += usize::from(y == 0);
            } else {
                c.shown += 1;
                c.shown_accepts += usize::from(y == 1);
            }
        }
        c
    }

    #[test]
    fn corners() {
        let s1 = [0.2, 0.5, 0.9, 0.4];
        let s2 = [0.3, 0.6, 0.8, 0.1];
        let y = [0, 1, 1, 0];
        let counts = count_grid(&s1, &s2, &y, &ThresholdGrid::uniform(100)).unwrap();
        let zero = counts.cell(0, 0);
        assert_eq!(zero.hidden(), 0);
        assert_eq!(zero.shown_acceptance_rate(), Some(0.5));
        let one = counts.cell(100, 100);
        assert_eq!(one.hidden_fraction(), 1.0);
        assert_eq!(one.hidden_precision(), Some(0.5));
    }

    #[test]
    fn separable_target_one_hides_all_negatives() {
        let s = [0.05, 0.1, 0.2, 0.3, 0.7, 0.8, 0.9];
        let y = [0, 0, 0, 0, 1, 1, 1];
        let sel = select_thresholds(&s, &s, &y, 1.0, &ThresholdGrid::default()).unwrap();
        assert!(sel.feasible);
        assert_eq!(sel.hidden_precision, Some(1.0));
        assert!((sel.hidden_fraction - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn all_positive_is_infeasible() {
        let s = [0.1, 0.5, 0.9];
        let sel = select_thresholds(&s, &s, &[1, 1, 1], 0.9, &ThresholdGrid::default()).unwrap();
        assert!(!sel.feasible);
        assert_eq!(sel.thresholds, PolicyThresholds { v1: 0.0, v2: 0.0 });
    }

    #[test]
    fn argument_errors() {
        let g = ThresholdGrid::default();
        assert!(matches!(
            select_thresholds(&[0.1], &[0.1], &[0], 0.5, &g),
            Err(PolicyError::InvalidTarget(_))
        ));
        assert!(matches!(count_grid(&[0.1], &[0.1, 0.2], &[0], &g), Err(PolicyError::Misaligned(_))));
        let bad = ThresholdGrid { v1: vec![0.5, 0.2], v2: vec![0.1] };
        assert!(count_grid(&[0.1], &[0.1], &[0], &bad).is_err());
    }

    proptest! {
        #[test]
        fn prefix_counts_match_brute_force(
            rows in proptest::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, 0u8..2), 0..200),
            steps in 1usize..30,
        ) {
            // Snap some scores onto grid values to exercise the <= boundary.
            let s1: Vec<f64> = rows.iter().enumerate().map(|(k, r)| if k % 3 == 0 { (r.0 * steps as f64).round() / steps as f64 } else { r.0 }).collect();
            let s2: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let y: Vec<u8> = rows.iter().map(|r| r.2).collect();
            let grid = ThresholdGrid::uniform(steps);
            let counts = count_grid(&s1, &s2, &y, &grid).unwrap();
            for (t, cell) in counts.iter() {
                prop_assert_eq!(*cell, brute(&s1, &s2, &y, t));
            }
            // Hidden count is monotone in each coordinate.
            for i in 0..grid.v1.len() {
                for j in 0..grid.v2.len() {
                    let h = counts.cell(i, j).hidden();
                    if i + 1 < grid.v1.len() { prop_assert!(counts.cell(i + 1, j).hidden() >= h); }
                    if j + 1 < grid.v2.len() { prop_assert!(counts.cell(i, j + 1).hidden() >= h); }
                }
            }
        }
    }
}
