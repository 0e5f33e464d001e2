//! Interaction telemetry: events, sessions, the log file format and labels.

mod labels;
mod log;
mod session;
mod summary;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use labels::{label_pairs, Label, LabeledEvent};
pub use log::{parse_log, parse_log_str, write_log, IngestOptions, DEFAULT_PROMPT_BYTE_BUDGET};
pub use session::{segment_sessions, DEFAULT_GAP_LIMIT_MS};
pub use summary::{summarize, Summary};

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: unknown action `{token}`")]
    UnknownAction { line: usize, token: String },
    #[error("line {line}: invalid event: {reason}")]
    InvalidEvent { line: usize, reason: String },
    #[error("events for programmer `{programmer_id}` are not sorted by timestamp at event {event_id}")]
    Unsorted { programmer_id: String, event_id: u64 },
    #[error("programmer `{programmer_id}` session {session_index}: event {event_id}: {reason}")]
    BrokenChain {
        programmer_id: String,
        session_index: u32,
        event_id: u64,
        reason: String,
    },
    #[error("duplicate session ({programmer_id}, {session_index})")]
    DuplicateSession { programmer_id: String, session_index: u32 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// What the programmer (or the assistant) did.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Shown,
    Accepted,
    Rejected,
    Browsed,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::Shown,
        ActionKind::Accepted,
        ActionKind::Rejected,
        ActionKind::Browsed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Shown => "shown",
            ActionKind::Accepted => "accepted",
            ActionKind::Rejected => "rejected",
            ActionKind::Browsed => "browsed",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error for an action token outside the four known values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownActionToken(pub String);

impl FromStr for ActionKind {
    type Err = UnknownActionToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shown" => Ok(ActionKind::Shown),
            "accepted" => Ok(ActionKind::Accepted),
            "rejected" => Ok(ActionKind::Rejected),
            "browsed" => Ok(ActionKind::Browsed),
            other => Err(UnknownActionToken(other.to_owned())),
        }
    }
}

/// One logged interaction. `timestamp_ms` is relative to the start of the
/// programmer's trace; no wall-clock time is ever stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub event_id: u64,
    pub timestamp_ms: u64,
    pub action: ActionKind,
    pub prompt: String,
    pub suggestion: String,
    pub suggestion_confidence: f64,
    pub programmer_id: String,
}

/// Consecutive events of one programmer with no gap above the session limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub programmer_id: String,
    pub session_index: u32,
    pub events: Vec<TelemetryEvent>,
}

impl SessionTrace {
    pub fn start_ms(&self) -> u64 {
        self.events.first().map_or(0, |e| e.timestamp_ms)
    }

    pub fn duration_ms(&self) -> u64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.timestamp_ms - a.timestamp_ms,
            _ => 0,
        }
    }

    /// Content identity of the session. It ignores event ids and the
    /// session index, so it survives writing a partition to its own log and
    /// reading it back.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.programmer_id.as_bytes());
        for e in &self.events {
            h.update([0x1e]);
            h.update(e.timestamp_ms.to_le_bytes());
            h.update([e.action.index() as u8]);
            h.update(e.prompt.as_bytes());
            h.update([0x1f]);
            h.update(e.suggestion.as_bytes());
            h.update([0x1f]);
            h.update(e.suggestion_confidence.to_bits().to_le_bytes());
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }

    /// Checks that every accept/reject/browse belongs to an open chain started
    /// by a `Shown` event with the same prompt. A browse may swap the
    /// suggestion; the terminal action must match the latest one.
    pub fn validate_chains(&self) -> Result<(), TelemetryError> {
        let mut open: Option<(&str, &str)> = None;
        for e in &self.events {
            let broken = |reason: &str| TelemetryError::BrokenChain {
                programmer_id: self.programmer_id.clone(),
                session_index: self.session_index,
                event_id: e.event_id,
                reason: reason.to_owned(),
            };
            match e.action {
                ActionKind::Shown => open = Some((&e.prompt, &e.suggestion)),
                ActionKind::Browsed => match open {
                    Some((p, _)) if p == e.prompt => open = Some((p, &e.suggestion)),
                    Some(_) => return Err(broken("browse prompt differs from shown prompt")),
                    None => return Err(broken("browse without a preceding shown event")),
                },
                ActionKind::Accepted | ActionKind::Rejected => match open {
                    Some((p, s)) if p == e.prompt && s == e.suggestion => open = None,
                    Some(_) => {
                        return Err(broken("outcome does not match the shown prompt and suggestion"))
                    }
                    None => return Err(broken("outcome without a preceding shown event")),
                },
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Simulated,
    Ingested,
}

/// Immutable collection of sessions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryStore {
    sessions: Vec<SessionTrace>,
    provenance: Provenance,
}

impl TelemetryStore {
    pub fn empty(provenance: Provenance) -> Self {
        Self {
            sessions: Vec::new(),
            provenance,
        }
    }

    /// Groups events by programmer (in order of first appearance), segments
    /// each programmer's stream and validates browse/outcome chains.
    pub fn from_events(
        events: Vec<TelemetryEvent>,
        provenance: Provenance,
        gap_limit_ms: u64,
    ) -> Result<Self, TelemetryError> {
        let mut order: Vec<String> = Vec::new();
        let mut by_programmer: HashMap<String, Vec<TelemetryEvent>> = HashMap::new();
        for e in events {
            if !by_programmer.contains_key(&e.programmer_id) {
                order.push(e.programmer_id.clone());
            }
            by_programmer.entry(e.programmer_id.clone()).or_default().push(e);
        }
        let mut sessions = Vec::new();
        for id in order {
            let events = by_programmer.remove(&id).unwrap_or_default();
            sessions.extend(segment_sessions(events, gap_limit_ms)?);
        }
        Self::from_sessions(sessions, provenance)
    }

    /// Wraps already-segmented sessions after checking key uniqueness and
    /// chain consistency.
    pub fn from_sessions(
        sessions: Vec<SessionTrace>,
        provenance: Provenance,
    ) -> Result<Self, TelemetryError> {
        let mut keys = BTreeSet::new();
        for s in &sessions {
            if !keys.insert((s.programmer_id.as_str(), s.session_index)) {
                return Err(TelemetryError::DuplicateSession {
                    programmer_id: s.programmer_id.clone(),
                    session_index: s.session_index,
                });
            }
            s.validate_chains()?;
        }
        Ok(Self {
            sessions,
            provenance,
        })
    }

    pub fn sessions(&self) -> &[SessionTrace] {
        &self.sessions
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.sessions.iter().map(|s| s.events.len()).sum()
    }

    /// All events in log order (ascending `event_id`).
    pub fn events_in_log_order(&self) -> Vec<&TelemetryEvent> {
        let mut all: Vec<&TelemetryEvent> =
            self.sessions.iter().flat_map(|s| s.events.iter()).collect();
        all.sort_by_key(|e| e.event_id);
        all
    }

    /// Programmer ids in order of first appearance.
    pub fn programmer_ids(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for s in &self.sessions {
            if seen.insert(s.programmer_id.as_str()) {
                out.push(s.programmer_id.as_str());
            }
        }
        out
    }

    pub fn session_fingerprints(&self) -> BTreeSet<u64> {
        self.sessions.iter().map(SessionTrace::fingerprint).collect()
    }

    /// SHA-256 of the canonical log serialization, hex encoded.
    pub fn checksum(&self) -> String {
        let mut buf = Vec::new();
        write_log(self, &mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ev(id: u64, ts: u64, action: ActionKind, prompt: &str, sugg: &str) -> TelemetryEvent {
        TelemetryEvent {
            event_id: id,
            timestamp_ms: ts,
            action,
            prompt: prompt.into(),
            suggestion: sugg.into(),
            suggestion_confidence: 0.5,
            programmer_id: "u1".into(),
        }
    }

    #[test]
    fn action_tokens() {
        for a in ActionKind::ALL {
            assert_eq!(a.as_str().parse::<ActionKind>().unwrap(), a);
        }
        assert!("hover".parse::<ActionKind>().is_err());
        assert!("Shown".parse::<ActionKind>().is_err());
    }

    #[test]
    fn chain_validation() {
        let ok = SessionTrace {
            programmer_id: "u1".into(),
            session_index: 0,
            events: vec![
                ev(0, 0, ActionKind::Shown, "p", "s1"),
                ev(1, 10, ActionKind::Browsed, "p", "s2"),
                ev(2, 20, ActionKind::Rejected, "p", "s2"),
            ],
        };
        ok.validate_chains().unwrap();

        let orphan = SessionTrace {
            events: vec![ev(0, 0, ActionKind::Accepted, "p", "s1")],
            ..ok.clone()
        };
        assert!(matches!(
            orphan.validate_chains(),
            Err(TelemetryError::BrokenChain { event_id: 0, .. })
        ));

        let mismatch = SessionTrace {
            events: vec![
                ev(0, 0, ActionKind::Shown, "p", "s1"),
                ev(1, 5, ActionKind::Accepted, "p", "other"),
            ],
            ..ok
        };
        assert!(mismatch.validate_chains().is_err());
    }

    #[test]
    fn duplicate_sessions_rejected() {
        let s = SessionTrace {
            programmer_id: "u1".into(),
            session_index: 0,
            events: vec![ev(0, 0, ActionKind::Shown, "p", "s")],
        };
        let err = TelemetryStore::from_sessions(vec![s.clone(), s], Provenance::Ingested);
        assert!(matches!(err, Err(TelemetryError::DuplicateSession { .. })));
    }
}
