use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::{LatentState, SimulationError};

/// A positive duration distribution, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TimeDistribution {
    PointMass { seconds: f64 },
    /// Log-normal parameterised by its mean and the standard deviation of
    /// the underlying normal.
    LogNormal { mean: f64, sigma: f64 },
    Exponential { mean: f64 },
}

impl TimeDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            TimeDistribution::PointMass { seconds } => seconds,
            TimeDistribution::LogNormal { mean, .. } | TimeDistribution::Exponential { mean } => mean,
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), SimulationError> {
        let ok = match *self {
            TimeDistribution::PointMass { seconds } => seconds.is_finite() && seconds >= 0.0,
            TimeDistribution::LogNormal { mean, sigma } => {
                mean.is_finite() && mean > 0.0 && sigma.is_finite() && sigma >= 0.0
            }
            TimeDistribution::Exponential { mean } => mean.is_finite() && mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(SimulationError::InvalidProfile(format!(
                "{name}: invalid distribution {self:?}"
            )))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TimeDistribution::PointMass { seconds } => seconds,
            TimeDistribution::LogNormal { mean, sigma } => {
                let mu = mean.ln() - 0.5 * sigma * sigma;
                LogNormal::new(mu, sigma).expect("validated").sample(rng)
            }
            TimeDistribution::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
        }
    }
}

/// Stochastic model of one programmer.
///
/// The latent state follows a first-order Markov chain, one step per
/// suggestion. A suggestion's true acceptance probability is
/// `sigmoid(logit(base[state]) + offset[state] + quality_logit_scale * q)`
/// where `q ~ N(0, 1)` is the latent suggestion quality and the per-state
/// offset makes the marginal rate in each state equal `base[state]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgrammerProfile {
    /// Row-stochastic, indexed by [`LatentState::index`].
    pub state_transition: Vec<Vec<f64>>,
    /// Start state of every trace; drawn uniformly when absent.
    #[serde(default)]
    pub initial_state: Option<LatentState>,
    pub accept_prob_by_state: BTreeMap<LatentState, f64>,
    pub expects_suggestion_by_state: BTreeMap<LatentState, bool>,
    pub verification_time: TimeDistribution,
    pub editing_time_given_accept: TimeDistribution,
    pub writing_time_given_reject: TimeDistribution,
    pub writing_time_not_shown: TimeDistribution,
    pub latency_tau: TimeDistribution,
    /// Relative increase of verification time per suggestion token beyond the first.
    pub verification_per_token: f64,
    pub quality_logit_scale: f64,
    /// Std-dev of the logit noise between true probability and reported confidence.
    pub confidence_logit_noise: f64,
}

impl Default for ProgrammerProfile {
    fn default() -> Self {
        let uniform = vec![vec![1.0 / LatentState::COUNT as f64; LatentState::COUNT]; LatentState::COUNT];
        Self {
            state_transition: uniform,
            initial_state: None,
            accept_prob_by_state: LatentState::ALL
                .iter()
                .map(|s| (*s, s.observed_acceptance()))
                .collect(),
            expects_suggestion_by_state: LatentState::ALL
                .iter()
                .map(|s| (*s, s.expects_suggestion_by_default()))
                .collect(),
            verification_time: TimeDistribution::LogNormal { mean: 3.0, sigma: 0.8 },
            editing_time_given_accept: TimeDistribution::LogNormal { mean: 6.0, sigma: 0.8 },
            writing_time_given_reject: TimeDistribution::LogNormal { mean: 24.0, sigma: 0.8 },
            writing_time_not_shown: TimeDistribution::LogNormal { mean: 24.0, sigma: 0.8 },
            latency_tau: TimeDistribution::LogNormal { mean: 0.8, sigma: 0.4 },
            verification_per_token: 0.04,
            quality_logit_scale: 1.8,
            confidence_logit_noise: 0.5,
        }
    }
}

impl ProgrammerProfile {
    /// A profile that starts in `state` and never leaves it.
    pub fn pinned(state: LatentState) -> Self {
        let mut p = Self::default();
        for row in &mut p.state_transition {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[state.index()] = 1.0;
        }
        p.initial_state = Some(state);
        p
    }

    pub fn accept_prob(&self, state: LatentState) -> f64 {
        self.accept_prob_by_state[&state]
    }

    pub fn expects_suggestion(&self, state: LatentState) -> bool {
        self.expects_suggestion_by_state[&state]
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let invalid = |m: String| Err(SimulationError::InvalidProfile(m));
        if self.state_transition.len() != LatentState::COUNT {
            return invalid(format!(
                "transition matrix has {} rows, expected {}",
                self.state_transition.len(),
                LatentState::COUNT
            ));
        }
        for (i, row) in self.state_transition.iter().enumerate() {
            if row.len() != LatentState::COUNT {
                return invalid(format!("transition row {i} has {} entries", row.len()));
            }
            if row.iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
                return invalid(format!("transition row {i} has an entry outside [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return invalid(format!("transition row {i} sums to {sum}"));
            }
        }
        for s in LatentState::ALL {
            match self.accept_prob_by_state.get(&s) {
                Some(p) if p.is_finite() && (0.0..=1.0).contains(p) => {}
                Some(p) => return invalid(format!("acceptance probability {p} for {s} outside [0, 1]")),
                None => return invalid(format!("missing acceptance probability for {s}")),
            }
            if !self.expects_suggestion_by_state.contains_key(&s) {
                return invalid(format!("missing expectation flag for {s}"));
            }
        }
        self.verification_time.validate("verification_time")?;
        self.editing_time_given_accept.validate("editing_time_given_accept")?;
        self.writing_time_given_reject.validate("writing_time_given_reject")?;
        self.writing_time_not_shown.validate("writing_time_not_shown")?;
        self.latency_tau.validate("latency_tau")?;
        if self.writing_time_given_reject.mean() <= self.editing_time_given_accept.mean() {
            return Err(SimulationError::AssumptionViolated {
                assumption: "editing-faster",
                detail: "expected writing time after reject must exceed expected editing time after accept"
                    .into(),
            });
        }
        for (name, v) in [
            ("verification_per_token", self.verification_per_token),
            ("quality_logit_scale", self.quality_logit_scale),
            ("confidence_logit_noise", self.confidence_logit_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(format!("{name} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn next_state<R: Rng + ?Sized>(&self, from: LatentState, rng: &mut R) -> LatentState {
        sample_categorical(&self.state_transition[from.index()], rng)
    }

    pub fn start_state<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentState {
        match self.initial_state {
            Some(s) => s,
            None => LatentState::ALL[rng.random_range(0..LatentState::COUNT)],
        }
    }
}

fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> LatentState {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return LatentState::ALL[i];
        }
    }
    // Rounding left u above the cumulative sum; take the last state with mass.
    let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    LatentState::ALL[last]
}
