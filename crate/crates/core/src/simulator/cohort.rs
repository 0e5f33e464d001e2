use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::text::{SuggestionKind, TextConfig, TextSampler};
use super::{LatentState, ProgrammerProfile, SimulationError};
use crate::features::lexical_scan;
use crate::policy::UtilityParameters;
use crate::seed::{substream, Rng as StreamRng};
use crate::telemetry::{
    ActionKind, Provenance, TelemetryError, TelemetryEvent, TelemetryStore, DEFAULT_GAP_LIMIT_MS,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_programmers: usize,
    pub sessions_per_programmer: usize,
    /// Suggestions shown per session.
    pub events_per_session: usize,
    pub seed: u64,
    pub text: TextConfig,
    /// Probability that a shown suggestion is browsed to an alternative
    /// before the terminal action.
    pub browse_rate: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_programmers: 50,
            sessions_per_programmer: 10,
            events_per_session: 100,
            seed: 0,
            text: TextConfig::default(),
            browse_rate: 0.005,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.n_programmers == 0 || self.sessions_per_programmer == 0 || self.events_per_session == 0 {
            return Err(SimulationError::InvalidConfig("all counts must be at least 1".into()));
        }
        let t = &self.text;
        for (name, r) in [
            ("browse_rate", self.browse_rate),
            ("text.comment_rate", t.comment_rate),
            ("text.single_char_rate", t.single_char_rate),
            ("text.mid_word_rate", t.mid_word_rate),
            ("text.state_cue_rate", t.state_cue_rate),
        ] {
            if !(r.is_finite() && (0.0..=1.0).contains(&r)) {
                return Err(SimulationError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        // The low-quality branches are scaled by up to 2x.
        if 2.0 * (t.comment_rate + t.single_char_rate + t.mid_word_rate) > 1.0 {
            return Err(SimulationError::InvalidConfig(
                "comment, single-char and mid-word rates must sum to at most 0.5".into(),
            ));
        }
        if !(t.mean_statements.is_finite() && t.mean_statements >= 0.0)
            || !(t.mean_prompt_lines.is_finite() && t.mean_prompt_lines >= 0.0)
        {
            return Err(SimulationError::InvalidConfig("text means must be non-negative".into()));
        }
        Ok(())
    }
}

/// Ground truth attached to one shown event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAnnotation {
    pub event_id: u64,
    pub latent_state: LatentState,
    pub true_accept_prob: f64,
    pub true_pstar: f64,
    pub true_delta_seconds: f64,
    pub expecting: bool,
    pub suggestion_kind: SuggestionKind,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Logit offset `c` such that `E[sigmoid(logit(base) + c + scale * q)] = base`
/// for `q ~ N(0, 1)`. Zero when there is nothing to correct.
pub fn calibrated_state_offset(base: f64, scale: f64) -> f64 {
    if base <= 0.0 || base >= 1.0 || scale == 0.0 {
        return 0.0;
    }
    const STEP: f64 = 0.01;
    let nodes: Vec<(f64, f64)> = (-800..=800)
        .map(|i| {
            let q = i as f64 * STEP;
            (q, (-0.5 * q * q).exp())
        })
        .collect();
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    let l = logit(base);
    let marginal = |c: f64| nodes.iter().map(|(q, w)| w * sigmoid(l + c + scale * q)).sum::<f64>() / total;
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if marginal(mid) < base {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn true_accept_prob(base: f64, offset: f64, scale: f64, q: f64) -> f64 {
    if base <= 0.0 {
        0.0
    } else if base >= 1.0 {
        1.0
    } else {
        sigmoid(logit(base) + offset + scale * q)
    }
}

struct ProgrammerOutput {
    events: Vec<TelemetryEvent>,
    /// Index into `events` of each annotated shown event.
    annotations: Vec<(usize, GroundTruthAnnotation)>,
}

const MAX_IN_SESSION_GAP_S: f64 = 25.0 * 60.0;

fn ms(seconds: f64) -> u64 {
    (seconds * 1000.0).round().max(0.0) as u64
}

fn simulate_programmer(
    index: usize,
    config: &SimulationConfig,
    profile: &ProgrammerProfile,
    offsets: &[f64; LatentState::COUNT],
) -> ProgrammerOutput {
    let mut rng: StreamRng = substream(config.seed, &format!("simulate/programmer/{index}"));
    let sampler = TextSampler::new(&config.text);
    let programmer_id = format!("p{index:04}");
    let mut events = Vec::new();
    let mut annotations = Vec::new();
    let mut state = profile.start_state(&mut rng);
    let mut t_ms: u64 = 0;

    let push = |events: &mut Vec<TelemetryEvent>, ts: u64, action, prompt: &str, sugg: &str, conf: f64| {
        events.push(TelemetryEvent {
            event_id: 0,
            timestamp_ms: ts,
            action,
            prompt: prompt.to_owned(),
            suggestion: sugg.to_owned(),
            suggestion_confidence: conf,
            programmer_id: programmer_id.clone(),
        });
    };

    for session in 0..config.sessions_per_programmer {
        if session > 0 {
            // Strictly longer than the session limit.
            t_ms += DEFAULT_GAP_LIMIT_MS + 60_000 + rng.random_range(0..3 * 3_600_000);
        }
        for k in 0..config.events_per_session {
            if k > 0 || session > 0 {
                state = profile.next_state(state, &mut rng);
            }
            let base = profile.accept_prob(state);
            let q: f64 = rng.sample(StandardNormal);
            let p = true_accept_prob(base, offsets[state.index()], profile.quality_logit_scale, q);
            let mut prompt = sampler.prompt(state, &mut rng);
            let (suggestion, kind) = sampler.suggestion(q, &mut prompt, &mut rng);
            let noise: f64 = rng.sample(StandardNormal);
            let confidence = sigmoid(logit(p.clamp(1e-6, 1.0 - 1e-6)) + profile.confidence_logit_noise * noise);

            let tokens = lexical_scan(&suggestion).tokens.len().max(1);
            let length_factor = 1.0 + profile.verification_per_token * (tokens - 1) as f64;
            let expecting = profile.expects_suggestion(state);
            let params = UtilityParameters {
                verification_s: profile.verification_time.mean() * length_factor,
                editing_given_accept_s: profile.editing_time_given_accept.mean(),
                writing_given_reject_s: profile.writing_time_given_reject.mean(),
                writing_not_shown_s: profile.writing_time_not_shown.mean(),
                latency_s: profile.latency_tau.mean(),
            };
            let pstar = params.break_even(expecting).expect("profile validated").value;
            let delta = params.suggestion_utility(p, expecting).expect("p in [0, 1]");

            let shown_at = t_ms;
            annotations.push((
                events.len(),
                GroundTruthAnnotation {
                    event_id: 0,
                    latent_state: state,
                    true_accept_prob: p,
                    true_pstar: pstar,
                    true_delta_seconds: delta,
                    expecting,
                    suggestion_kind: kind,
                },
            ));
            push(&mut events, shown_at, ActionKind::Shown, &prompt, &suggestion, confidence);

            let verification = profile.verification_time.sample(&mut rng) * length_factor;
            let mut terminal_suggestion = suggestion;
            if rng.random::<f64>() < config.browse_rate {
                terminal_suggestion = sampler.alternative(&terminal_suggestion, &mut rng);
                let at = shown_at + ms(verification / 2.0);
                push(&mut events, at, ActionKind::Browsed, &prompt, &terminal_suggestion, confidence);
            }
            let accepted = rng.random::<f64>() < p;
            let outcome_at = shown_at + ms(verification);
            let action = if accepted { ActionKind::Accepted } else { ActionKind::Rejected };
            push(&mut events, outcome_at, action, &prompt, &terminal_suggestion, confidence);

            let follow = if accepted {
                profile.editing_time_given_accept.sample(&mut rng)
            } else {
                profile.writing_time_given_reject.sample(&mut rng)
            };
            t_ms = outcome_at + ms(follow.clamp(0.2, MAX_IN_SESSION_GAP_S));
        }
    }
    ProgrammerOutput { events, annotations }
}

/// Simulates `config.n_programmers` programmers; programmer `i` uses
/// `profiles[i % profiles.len()]`. Each programmer draws from its own named
/// substream, so the result does not depend on the thread count.
pub fn simulate_cohort(
    config: &SimulationConfig,
    profiles: &[ProgrammerProfile],
) -> Result<(TelemetryStore, Vec<GroundTruthAnnotation>), SimulationError> {
    config.validate()?;
    if profiles.is_empty() {
        return Err(SimulationError::InvalidProfile("no profiles given".into()));
    }
    for p in profiles {
        p.validate()?;
    }
    let offsets: Vec<[f64; LatentState::COUNT]> = profiles
        .iter()
        .map(|p| {
            let mut o = [0.0; LatentState::COUNT];
            for s in LatentState::ALL {
                o[s.index()] = calibrated_state_offset(p.accept_prob(s), p.quality_logit_scale);
            }
            o
        })
        .collect();

    let outputs: Vec<ProgrammerOutput> = (0..config.n_programmers)
        .into_par_iter()
        .map(|i| {
            let k = i % profiles.len();
            simulate_programmer(i, config, &profiles[k], &offsets[k])
        })
        .collect();

    let mut events = Vec::new();
    let mut annotations = Vec::new();
    for out in outputs {
        let base = events.len();
        for (pos, mut ann) in out.annotations {
            ann.event_id = (base + pos) as u64;
            annotations.push(ann);
        }
        events.extend(out.events);
    }
    for (i, e) in events.iter_mut().enumerate() {
        e.event_id = i as u64;
    }
    let store = TelemetryStore::from_events(events, Provenance::Simulated, DEFAULT_GAP_LIMIT_MS)?;
    Ok((store, annotations))
}

/// One JSON record per annotated shown event.
pub fn write_annotations<W: Write>(annotations: &[GroundTruthAnnotation], mut out: W) -> Result<(), TelemetryError> {
    for a in annotations {
        serde_json::to_writer(&mut out, a).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{label_pairs, summarize, Label};

    fn small(seed: u64) -> SimulationConfig {
        SimulationConfig {
            n_programmers: 4,
            sessions_per_programmer: 3,
            events_per_session: 20,
            seed,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn offset_restores_marginal() {
        for base in [0.11, 0.42, 0.98] {
            let c = calibrated_state_offset(base, 1.8);
            let mut rng = substream(5, "offset");
            let n = 400_000;
            let m: f64 = (0..n)
                .map(|_| true_accept_prob(base, c, 1.8, rng.sample(StandardNormal)))
                .sum::<f64>()
                / n as f64;
            assert!((m - base).abs() < 2e-3, "{base} {m}");
        }
        assert_eq!(calibrated_state_offset(0.0, 2.0), 0.0);
        assert_eq!(calibrated_state_offset(0.4, 0.0), 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = simulate_cohort(&small(9), &[ProgrammerProfile::default()]).unwrap();
        let b = simulate_cohort(&small(9), &[ProgrammerProfile::default()]).unwrap();
        assert_eq!(a.0.checksum(), b.0.checksum());
        assert_eq!(a.1, b.1);
        let c = simulate_cohort(&small(10), &[ProgrammerProfile::default()]).unwrap();
        assert_ne!(a.0.checksum(), c.0.checksum());
    }

    #[test]
    fn structure_and_annotation_alignment() {
        let cfg = SimulationConfig { browse_rate: 0.2, ..small(3) };
        let (store, ann) = simulate_cohort(&cfg, &[ProgrammerProfile::default()]).unwrap();
        assert_eq!(store.sessions().len(), 4 * 3);
        assert!(store.sessions().iter().all(|s| s.events.iter().filter(|e| e.action == ActionKind::Shown).count() == 20));
        let shown: Vec<u64> = store
            .events_in_log_order()
            .into_iter()
            .filter(|e| e.action == ActionKind::Shown)
            .map(|e| e.event_id)
            .collect();
        assert_eq!(shown, ann.iter().map(|a| a.event_id).collect::<Vec<_>>());
        assert_eq!(label_pairs(&store).len(), ann.len());
        let s = summarize(&store);
        assert!(s.browsed > 0);
        for a in &ann {
            assert!((0.0..=1.0).contains(&a.true_accept_prob));
        }
    }

    #[test]
    fn zero_acceptance_means_no_accepts() {
        let mut p = ProgrammerProfile::default();
        p.accept_prob_by_state.values_mut().for_each(|v| *v = 0.0);
        let (store, _) = simulate_cohort(&small(1), &[p]).unwrap();
        let labels = label_pairs(&store);
        assert!(!labels.is_empty());
        assert!(labels.iter().all(|l| l.label == Label::Reject));
        assert_eq!(summarize(&store).accepted, 0);
    }

    #[test]
    fn invalid_inputs_fail_before_output() {
        let mut bad = ProgrammerProfile::default();
        bad.state_transition[0][0] = 2.0;
        assert!(simulate_cohort(&small(1), &[bad]).is_err());
        assert!(simulate_cohort(&small(1), &[]).is_err());
        let cfg = SimulationConfig { n_programmers: 0, ..small(1) };
        assert!(simulate_cohort(&cfg, &[ProgrammerProfile::default()]).is_err());
    }

    #[test]
    fn delta_sign_agrees_with_pstar() {
        let (_, ann) = simulate_cohort(&small(2), &[ProgrammerProfile::default()]).unwrap();
        for a in &ann {
            let d = a.true_accept_prob - a.true_pstar;
            if d.abs() > 1e-12 {
                assert_eq!(a.true_delta_seconds > 0.0, d > 0.0, "{a:?}");
            }
        }
    }
}
