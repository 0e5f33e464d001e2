use super::{SessionTrace, TelemetryError, TelemetryEvent};

/// Thirty minutes. A gap strictly larger than this starts a new session.
pub const DEFAULT_GAP_LIMIT_MS: u64 = 30 * 60 * 1000;

/// Splits one programmer's time-ordered events into sessions.
///
/// A new session starts exactly when the gap to the previous event exceeds
/// `gap_limit_ms`; a gap equal to the limit stays in the same session.
/// Session indices count up from zero per programmer.
pub fn segment_sessions(
    events: Vec<TelemetryEvent>,
    gap_limit_ms: u64,
) -> Result<Vec<SessionTrace>, TelemetryError> {
    let Some(first) = events.first() else {
        return Ok(Vec::new());
    };
    let programmer_id = first.programmer_id.clone();

    let mut sessions: Vec<SessionTrace> = Vec::new();
    let mut current: Vec<TelemetryEvent> = Vec::new();
    let mut prev_ts: Option<u64> = None;
    for e in events {
        if e.programmer_id != programmer_id {
            return Err(TelemetryError::Unsorted {
                programmer_id: e.programmer_id.clone(),
                event_id: e.event_id,
            });
        }
        if let Some(prev) = prev_ts {
            if e.timestamp_ms < prev {
                return Err(TelemetryError::Unsorted {
                    programmer_id,
                    event_id: e.event_id,
                });
            }
            if e.timestamp_ms - prev > gap_limit_ms {
                sessions.push(SessionTrace {
                    programmer_id: programmer_id.clone(),
                    session_index: sessions.len() as u32,
                    events: std::mem::take(&mut current),
                });
            }
        }
        prev_ts = Some(e.timestamp_ms);
        current.push(e);
    }
    sessions.push(SessionTrace {
        programmer_id: programmer_id.clone(),
        session_index: sessions.len() as u32,
        events: current,
    });
    Ok(sessions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::ActionKind;
    use proptest::prelude::*;

    const MIN: u64 = 60_000;

    fn at(times: &[u64]) -> Vec<TelemetryEvent> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| TelemetryEvent {
                event_id: i as u64,
                timestamp_ms: t,
                action: ActionKind::Shown,
                prompt: "p".into(),
                suggestion: "s".into(),
                suggestion_confidence: 0.5,
                programmer_id: "u".into(),
            })
            .collect()
    }

    fn from_gaps(gaps: &[u64]) -> Vec<TelemetryEvent> {
        let mut t = 0;
        let mut times = vec![0];
        for g in gaps {
            t += g;
            times.push(t);
        }
        at(&times)
    }

    fn sizes(s: &[SessionTrace]) -> Vec<usize> {
        s.iter().map(|s| s.events.len()).collect()
    }

    #[test]
    fn thirty_one_minute_gap_splits() {
        let s = segment_sessions(from_gaps(&[5 * MIN, 29 * MIN, 31 * MIN, 2 * MIN]), DEFAULT_GAP_LIMIT_MS)
            .unwrap();
        assert_eq!(sizes(&s), vec![3, 2]);
        assert_eq!(s[0].session_index, 0);
        assert_eq!(s[1].session_index, 1);
    }

    #[test]
    fn single_event_single_session() {
        let s = segment_sessions(at(&[42]), DEFAULT_GAP_LIMIT_MS).unwrap();
        assert_eq!(sizes(&s), vec![1]);
    }

    #[test]
    fn exact_limit_does_not_split() {
        let s = segment_sessions(from_gaps(&[30 * MIN; 4]), DEFAULT_GAP_LIMIT_MS).unwrap();
        assert_eq!(sizes(&s), vec![5]);
        let s = segment_sessions(from_gaps(&[30 * MIN + 1]), DEFAULT_GAP_LIMIT_MS).unwrap();
        assert_eq!(sizes(&s), vec![1, 1]);
    }

    #[test]
    fn unsorted_is_an_error() {
        let err = segment_sessions(at(&[10, 5]), DEFAULT_GAP_LIMIT_MS).unwrap_err();
        assert!(matches!(err, TelemetryError::Unsorted { event_id: 1, .. }));
    }

    #[test]
    fn empty_input_no_sessions() {
        assert!(segment_sessions(Vec::new(), DEFAULT_GAP_LIMIT_MS).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn idempotent_and_count_preserving(gaps in proptest::collection::vec(0u64..(60 * MIN), 0..60)) {
            let events = from_gaps(&gaps);
            let n = events.len();
            let once = segment_sessions(events, DEFAULT_GAP_LIMIT_MS).unwrap();
            prop_assert_eq!(once.iter().map(|s| s.events.len()).sum::<usize>(), n);
            for s in &once {
                for w in s.events.windows(2) {
                    prop_assert!(w[1].timestamp_ms - w[0].timestamp_ms <= DEFAULT_GAP_LIMIT_MS);
                }
            }
            let flat: Vec<_> = once.iter().flat_map(|s| s.events.clone()).collect();
            let twice = segment_sessions(flat, DEFAULT_GAP_LIMIT_MS).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
