use serde::{Deserialize, Serialize};

use super::{ActionKind, SessionTrace, TelemetryEvent, TelemetryStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Accept,
    Reject,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Accept => 1,
            Label::Reject => 0,
        }
    }
}

/// A shown suggestion together with the outcome that terminated its chain.
#[derive(Clone, Copy, Debug)]
pub struct LabeledEvent<'a> {
    pub session: &'a SessionTrace,
    /// Index of the shown event within `session.events`.
    pub position: usize,
    pub label: Label,
    pub outcome: &'a TelemetryEvent,
}

impl<'a> LabeledEvent<'a> {
    pub fn shown(&self) -> &'a TelemetryEvent {
        &self.session.events[self.position]
    }

    /// Events strictly before the shown event in its session.
    pub fn context(&self) -> &'a [TelemetryEvent] {
        &self.session.events[..self.position]
    }

    /// Milliseconds from display to the terminal action.
    pub fn response_ms(&self) -> u64 {
        self.outcome.timestamp_ms - self.shown().timestamp_ms
    }
}

/// Pairs each shown event with its terminal accept or reject. Browse events
/// are folded into the chain's terminal action; shown events whose chain never
/// terminates (a new shown arrives first, or the session ends) are dropped.
pub fn label_pairs(store: &TelemetryStore) -> Vec<LabeledEvent<'_>> {
    let mut out = Vec::new();
    for session in store.sessions() {
        let mut open: Option<usize> = None;
        for (i, e) in session.events.iter().enumerate() {
            match e.action {
                ActionKind::Shown => open = Some(i),
                ActionKind::Browsed => {}
                ActionKind::Accepted | ActionKind::Rejected => {
                    if let Some(position) = open.take() {
                        out.push(LabeledEvent {
                            session,
                            position,
                            label: if e.action == ActionKind::Accepted {
                                Label::Accept
                            } else {
                                Label::Reject
                            },
                            outcome: e,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{Provenance, DEFAULT_GAP_LIMIT_MS};
    use ActionKind::*;

    fn store(trace: &[(ActionKind, &str)]) -> TelemetryStore {
        let events = trace
            .iter()
            .enumerate()
            .map(|(i, (a, s))| TelemetryEvent {
                event_id: i as u64,
                timestamp_ms: i as u64 * 1000,
                action: *a,
                prompt: "p".into(),
                suggestion: (*s).into(),
                suggestion_confidence: 0.5,
                programmer_id: "u".into(),
            })
            .collect();
        TelemetryStore::from_events(events, Provenance::Ingested, DEFAULT_GAP_LIMIT_MS).unwrap()
    }

    fn labels(st: &TelemetryStore) -> Vec<(String, Label)> {
        label_pairs(st)
            .iter()
            .map(|l| (l.shown().suggestion.clone(), l.label))
            .collect()
    }

    #[test]
    fn accept_pair() {
        let st = store(&[(Shown, "s1"), (Accepted, "s1")]);
        assert_eq!(labels(&st), vec![("s1".into(), Label::Accept)]);
    }

    #[test]
    fn browse_folds_into_terminal() {
        let st = store(&[(Shown, "s1"), (Browsed, "s1'"), (Rejected, "s1'")]);
        assert_eq!(labels(&st), vec![("s1".into(), Label::Reject)]);
        let pair = label_pairs(&st)[0];
        assert_eq!(pair.response_ms(), 2000);
        assert_eq!(pair.context().len(), 0);
    }

    #[test]
    fn unresolved_dropped() {
        let st = store(&[(Shown, "s1")]);
        assert!(labels(&st).is_empty());
        let st = store(&[(Shown, "s1"), (Shown, "s2"), (Accepted, "s2")]);
        assert_eq!(labels(&st), vec![("s2".into(), Label::Accept)]);
    }

    // Hand-enumerated traces: every well-formed chain of length <= 4 built
    // from one shown, optional browses and an optional terminal.
    #[test]
    fn enumerated_chains() {
        for browses in 0..3 {
            for terminal in [None, Some(Accepted), Some(Rejected)] {
                let mut trace = vec![(Shown, "s0")];
                let names = ["s1", "s2", "s3"];
                let mut cur = "s0";
                for name in names.iter().take(browses) {
                    trace.push((Browsed, name));
                    cur = name;
                }
                if let Some(t) = terminal {
                    trace.push((t, cur));
                }
                let st = store(&trace);
                let got = labels(&st);
                match terminal {
                    None => assert!(got.is_empty()),
                    Some(Accepted) => assert_eq!(got, vec![("s0".into(), Label::Accept)]),
                    Some(_) => assert_eq!(got, vec![("s0".into(), Label::Reject)]),
                }
                let shown = trace.iter().filter(|t| t.0 == Shown).count();
                assert!(got.len() <= shown);
            }
        }
    }
}
