//! Brute-force time simulation used to check the closed-form utility results.

use rand::Rng;
use serde::Serialize;

use super::{ProgrammerProfile, SimulationError};
use crate::policy::UtilityParameters;
use crate::seed::substream;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    fn from_samples(xs: impl Iterator<Item = f64>) -> Self {
        // Welford.
        let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for x in xs {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self {
            mean,
            std_error: (var / n.max(1) as f64).sqrt(),
            n,
        }
    }
}

/// Expected times of the profile at a nominal (single-token) suggestion.
pub fn utility_parameters(profile: &ProgrammerProfile) -> UtilityParameters {
    UtilityParameters {
        verification_s: profile.verification_time.mean(),
        editing_given_accept_s: profile.editing_time_given_accept.mean(),
        writing_given_reject_s: profile.writing_time_given_reject.mean(),
        writing_not_shown_s: profile.writing_time_not_shown.mean(),
        latency_s: profile.latency_tau.mean(),
    }
}

/// Closed-form suggestion utility for the profile's expected times.
pub fn closed_form_delta(profile: &ProgrammerProfile, p_accept: f64, expecting: bool) -> f64 {
    utility_parameters(profile)
        .suggestion_utility(p_accept, expecting)
        .expect("p_accept in [0, 1]")
}

struct TimeDraw {
    verification: f64,
    editing: f64,
    writing_reject: f64,
    writing_not_shown: f64,
    latency: f64,
    u: f64,
}

impl TimeDraw {
    fn sample<R: Rng + ?Sized>(profile: &ProgrammerProfile, rng: &mut R) -> Self {
        Self {
            verification: profile.verification_time.sample(rng),
            editing: profile.editing_time_given_accept.sample(rng),
            writing_reject: profile.writing_time_given_reject.sample(rng),
            writing_not_shown: profile.writing_time_not_shown.sample(rng),
            latency: profile.latency_tau.sample(rng),
            u: rng.random(),
        }
    }

    fn shown(&self, p_accept: f64, expecting: bool) -> f64 {
        let after = if self.u < p_accept { self.editing } else { self.writing_reject };
        self.verification + after + if expecting { self.latency } else { 0.0 }
    }
}

/// Simulates the total time of one decision point `n_samples` times.
///
/// Shown: verification, then editing (on accept) or writing (on reject),
/// plus latency when the programmer is expecting a suggestion. Not shown:
/// the writing time without a suggestion.
pub fn monte_carlo_time<R: Rng + ?Sized>(
    profile: &ProgrammerProfile,
    p_accept: f64,
    expecting: bool,
    show: bool,
    n_samples: usize,
    rng: &mut R,
) -> MeanEstimate {
    let n = n_samples.max(1);
    MeanEstimate::from_samples((0..n).map(|_| {
        let d = TimeDraw::sample(profile, rng);
        if show {
            d.shown(p_accept, expecting)
        } else {
            d.writing_not_shown
        }
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakEvenRow {
    pub p: f64,
    pub pstar: f64,
    pub delta_closed_form: f64,
    pub delta_monte_carlo: f64,
    pub std_error: f64,
    /// sign(delta) == sign(p - pstar).
    pub sign_agrees: bool,
    /// |monte carlo - closed form| <= 3 standard errors.
    pub within_three_se: bool,
    pub agreement: bool,
}

const SIGN_TOL: f64 = 1e-9;

fn sign(x: f64) -> i8 {
    if x > SIGN_TOL {
        1
    } else if x < -SIGN_TOL {
        -1
    } else {
        0
    }
}

/// Checks the break-even threshold against closed-form and simulated utility
/// on every grid probability. The same `n_samples` time draws are reused for
/// all grid points.
pub fn verify_break_even(
    profile: &ProgrammerProfile,
    grid: &[f64],
    n_samples: usize,
    expecting: bool,
    seed: u64,
) -> Result<Vec<BreakEvenRow>, SimulationError> {
    profile.validate()?;
    let params = utility_parameters(profile);
    if (params.writing_given_reject_s - params.writing_not_shown_s).abs() > 1e-9 {
        return Err(SimulationError::AssumptionViolated {
            assumption: "equal-writing",
            detail: format!(
                "expected writing time after reject ({}) differs from writing time without a suggestion ({})",
                params.writing_given_reject_s, params.writing_not_shown_s
            ),
        });
    }
    let pstar = params
        .break_even(expecting)
        .map_err(|e| SimulationError::InvalidProfile(e.to_string()))?
        .value;
    let mut rng = substream(seed, "verify-prop1");
    let draws: Vec<TimeDraw> = (0..n_samples.max(2)).map(|_| TimeDraw::sample(profile, &mut rng)).collect();

    grid.iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimulationError::InvalidConfig(format!("grid value {p} outside [0, 1]")));
            }
            let closed = params.suggestion_utility(p, expecting).expect("p checked");
            let mc = MeanEstimate::from_samples(draws.iter().map(|d| d.writing_not_shown - d.shown(p, expecting)));
            let sign_agrees = sign(closed) == sign(p - pstar);
            let within = (mc.mean - closed).abs() <= 3.0 * mc.std_error;
            Ok(BreakEvenRow {
                p,
                pstar,
                delta_closed_form: closed,
                delta_monte_carlo: mc.mean,
                std_error: mc.std_error,
                sign_agrees,
                within_three_se: within,
                agreement: sign_agrees && within,
            })
        })
        .collect()
}

/// Total simulated time of a "show iff p > threshold" policy for each
/// threshold. `cases` holds (true acceptance probability, expecting) per
/// decision point; each case is replayed `replicates` times with the same
/// time draws for every threshold.
pub fn threshold_time_curve(
    profile: &ProgrammerProfile,
    cases: &[(f64, bool)],
    thresholds: &[f64],
    replicates: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    let mut rng = substream(seed, "threshold-time-curve");
    // (p, shown time, not-shown time)
    let mut outcomes: Vec<(f64, f64, f64)> = Vec::with_capacity(cases.len() * replicates);
    for &(p, expecting) in cases {
        for _ in 0..replicates {
            let d = TimeDraw::sample(profile, &mut rng);
            outcomes.push((p, d.shown(p, expecting), d.writing_not_shown));
        }
    }
    outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_shown: f64 = outcomes.iter().map(|o| o.1).sum();
    // Running sums over the prefix of hidden cases (p <= threshold).
    let mut sorted: Vec<(usize, f64)> = thresholds.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut result = vec![(0.0, 0.0); thresholds.len()];
    let (mut k, mut hidden_not_shown, mut hidden_shown) = (0usize, 0.0, 0.0);
    for (idx, t) in sorted {
        while k < outcomes.len() && outcomes[k].0 <= t {
            hidden_not_shown += outcomes[k].2;
            hidden_shown += outcomes[k].1;
            k += 1;
        }
        result[idx] = (t, total_shown - hidden_shown + hidden_not_shown);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::TimeDistribution::{self, PointMass};

    fn point_profile(ver: f64, edit: f64, write: f64, tau: f64) -> ProgrammerProfile {
        ProgrammerProfile {
            verification_time: PointMass { seconds: ver },
            editing_time_given_accept: PointMass { seconds: edit },
            writing_time_given_reject: PointMass { seconds: write },
            writing_time_not_shown: PointMass { seconds: write },
            latency_tau: PointMass { seconds: tau },
            ..ProgrammerProfile::default()
        }
    }

    #[test]
    fn point_mass_shown_time_is_exact_in_expectation() {
        let p = point_profile(4.0, 6.0, 20.0, 0.0);
        let mut rng = substream(11, "mc");
        let est = monte_carlo_time(&p, 0.5, true, true, 200_000, &mut rng);
        // Only the accept coin is random: mean -> 17 with se ~ 7/sqrt(n).
        assert!((est.mean - 17.0).abs() <= 3.0 * est.std_error, "{est:?}");
        let closed = utility_parameters(&p).expected_time_shown(0.5).unwrap();
        assert_eq!(closed, 17.0);
        let not = monte_carlo_time(&p, 0.5, true, false, 10, &mut rng);
        assert_eq!(not.mean, 20.0);
        assert_eq!(not.std_error, 0.0);
        let always = monte_carlo_time(&p, 1.0, true, true, 10, &mut rng);
        assert_eq!(always.mean, 10.0);
    }

    #[test]
    fn exponential_times_match_closed_form() {
        let p = ProgrammerProfile {
            verification_time: TimeDistribution::Exponential { mean: 5.0 },
            editing_time_given_accept: TimeDistribution::Exponential { mean: 8.0 },
            writing_time_given_reject: TimeDistribution::Exponential { mean: 30.0 },
            writing_time_not_shown: TimeDistribution::Exponential { mean: 30.0 },
            latency_tau: TimeDistribution::Exponential { mean: 1.0 },
            ..ProgrammerProfile::default()
        };
        let mut rng = substream(12, "mc");
        for (prob, expecting) in [(0.2, true), (0.7, false)] {
            let est = monte_carlo_time(&p, prob, expecting, true, 100_000, &mut rng);
            let closed = utility_parameters(&p).expected_time_shown(prob).unwrap()
                + if expecting { 1.0 } else { 0.0 };
            assert!((est.mean - closed).abs() <= 3.0 * est.std_error, "{prob}: {est:?} vs {closed}");
        }
    }

    #[test]
    fn latency_only_when_expecting() {
        let p = point_profile(4.0, 6.0, 20.0, 3.0);
        let mut rng = substream(13, "mc");
        assert_eq!(monte_carlo_time(&p, 1.0, true, true, 5, &mut rng).mean, 13.0);
        assert_eq!(monte_carlo_time(&p, 1.0, false, true, 5, &mut rng).mean, 10.0);
    }

    #[test]
    fn break_even_rows_agree() {
        let p = point_profile(5.0, 10.0, 30.0, 1.0);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let rows = verify_break_even(&p, &grid, 100_000, true, 1).unwrap();
        assert!((rows[0].pstar - 0.3).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.agreement), "{:?}", rows.iter().find(|r| !r.agreement));
        let at = rows.iter().find(|r| (r.p - 0.3).abs() < 1e-12).unwrap();
        assert!(at.delta_closed_form.abs() < 1e-9);
        let half = rows.iter().find(|r| r.p == 0.5).unwrap();
        assert!(half.delta_closed_form > 0.0 && half.delta_monte_carlo > 0.0);
    }

    #[test]
    fn break_even_checks_time_orderings() {
        let mut p = point_profile(5.0, 10.0, 30.0, 1.0);
        p.writing_time_not_shown = PointMass { seconds: 25.0 };
        assert!(matches!(
            verify_break_even(&p, &[0.5], 100, true, 1),
            Err(SimulationError::AssumptionViolated { assumption: "equal-writing", .. })
        ));
        let p = point_profile(5.0, 40.0, 30.0, 1.0);
        assert!(matches!(
            verify_break_even(&p, &[0.5], 100, true, 1),
            Err(SimulationError::AssumptionViolated { assumption: "editing-faster", .. })
        ));
    }

    #[test]
    fn time_curve_matches_direct_sum() {
        let p = point_profile(4.0, 6.0, 20.0, 0.0);
        let cases = [(0.1, true), (0.5, true), (0.9, false)];
        let curve = threshold_time_curve(&p, &cases, &[1.0, 0.0, 0.5], 1, 3);
        // Hide everything at threshold 1: three not-shown writes.
        assert_eq!(curve[0], (1.0, 60.0));
        // Threshold 0.5 hides the first two (p <= 0.5).
        let shown_third = curve[2].1 - 40.0;
        assert!(shown_third == 10.0 || shown_third == 24.0);
    }
}
