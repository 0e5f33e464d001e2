//! Line-delimited JSON telemetry log.
//!
//! One record per line with the fields, in this order:
//! `ts_ms`, `action`, `prompt`, `suggestion`, `confidence`, `programmer_id`.
//! The event id of a record is its zero-based line index. Writing a store
//! emits records in event-id order, so parsing and re-writing a canonical
//! log reproduces it byte for byte.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    ActionKind, Provenance, TelemetryError, TelemetryEvent, TelemetryStore, DEFAULT_GAP_LIMIT_MS,
};

pub const DEFAULT_PROMPT_BYTE_BUDGET: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IngestOptions {
    pub gap_limit_ms: u64,
    /// Prompts longer than this keep only their trailing bytes (the code
    /// nearest the cursor), cut at a character boundary.
    pub prompt_byte_budget: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            gap_limit_ms: DEFAULT_GAP_LIMIT_MS,
            prompt_byte_budget: DEFAULT_PROMPT_BYTE_BUDGET,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    ts_ms: u64,
    action: String,
    prompt: String,
    suggestion: String,
    confidence: f64,
    programmer_id: String,
}

#[derive(Serialize)]
struct RecordRef<'a> {
    ts_ms: u64,
    action: ActionKind,
    prompt: &'a str,
    suggestion: &'a str,
    confidence: f64,
    programmer_id: &'a str,
}

fn truncate_tail(mut s: String, budget: usize) -> String {
    if s.len() <= budget {
        return s;
    }
    let mut cut = s.len() - budget;
    while !s.is_char_boundary(cut) {
        cut += 1;
    }
    s.drain(..cut);
    s
}

fn parse_line(line_no: usize, bytes: &[u8], opts: &IngestOptions) -> Result<TelemetryEvent, TelemetryError> {
    let malformed = |reason: String| TelemetryError::Malformed {
        line: line_no,
        reason,
    };
    let text = std::str::from_utf8(bytes).map_err(|e| malformed(format!("invalid UTF-8: {e}")))?;
    if text.trim().is_empty() {
        return Err(malformed("empty line".into()));
    }
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let action: ActionKind = raw
        .action
        .parse()
        .map_err(|_| TelemetryError::UnknownAction {
            line: line_no,
            token: raw.action.clone(),
        })?;
    let invalid = |reason: &str| TelemetryError::InvalidEvent {
        line: line_no,
        reason: reason.to_owned(),
    };
    if raw.suggestion.is_empty() {
        return Err(invalid("suggestion is empty"));
    }
    if !(raw.confidence.is_finite() && (0.0..=1.0).contains(&raw.confidence)) {
        return Err(invalid("confidence outside [0, 1]"));
    }
    if raw.programmer_id.is_empty() {
        return Err(invalid("programmer_id is empty"));
    }
    Ok(TelemetryEvent {
        event_id: (line_no - 1) as u64,
        timestamp_ms: raw.ts_ms,
        action,
        prompt: truncate_tail(raw.prompt, opts.prompt_byte_budget),
        suggestion: raw.suggestion,
        suggestion_confidence: raw.confidence,
        programmer_id: raw.programmer_id,
    })
}

/// Reads a telemetry log into a segmented, validated store.
pub fn parse_log<R: BufRead>(mut reader: R, opts: &IngestOptions) -> Result<TelemetryStore, TelemetryError> {
    let mut events = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        events.push(parse_line(line_no, &buf, opts)?);
    }
    TelemetryStore::from_events(events, Provenance::Ingested, opts.gap_limit_ms)
}

pub fn parse_log_str(text: &str, opts: &IngestOptions) -> Result<TelemetryStore, TelemetryError> {
    parse_log(text.as_bytes(), opts)
}

/// Writes every event of the store in log order, one record per line.
pub fn write_log<W: Write>(store: &TelemetryStore, mut out: W) -> Result<(), TelemetryError> {
    for e in store.events_in_log_order() {
        let rec = RecordRef {
            ts_ms: e.timestamp_ms,
            action: e.action,
            prompt: &e.prompt,
            suggestion: &e.suggestion,
            confidence: e.suggestion_confidence,
            programmer_id: &e.programmer_id,
        };
        serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ONE: &str = r#"{"ts_ms":0,"action":"shown","prompt":"import nu","suggestion":"mpy","confidence":0.9,"programmer_id":"u1"}"#;

    fn opts() -> IngestOptions {
        IngestOptions::default()
    }

    #[test]
    fn single_record() {
        let store = parse_log_str(&format!("{ONE}\n"), &opts()).unwrap();
        assert_eq!(store.event_count(), 1);
        let e = &store.sessions()[0].events[0];
        assert_eq!(e.action, ActionKind::Shown);
        assert_eq!(e.prompt, "import nu");
        assert_eq!(e.suggestion, "mpy");
        assert_eq!(e.suggestion_confidence, 0.9);
        assert_eq!(e.programmer_id, "u1");
        assert_eq!(store.provenance(), Provenance::Ingested);
    }

    #[test]
    fn empty_input() {
        let store = parse_log_str("", &opts()).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn unknown_action_names_line() {
        let line = ONE.replace("shown", "hover");
        let err = parse_log_str(&line, &opts()).unwrap_err();
        match err {
            TelemetryError::UnknownAction { line, token } => {
                assert_eq!(line, 1);
                assert_eq!(token, "hover");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_number() {
        let text = format!("{ONE}\n{{not json}}\n");
        let err = parse_log_str(&text, &opts()).unwrap_err();
        assert!(matches!(err, TelemetryError::Malformed { line: 2, .. }), "{err}");
        let err = parse_log_str(&format!("{ONE}\n\n{ONE}\n"), &opts()).unwrap_err();
        assert!(matches!(err, TelemetryError::Malformed { line: 2, .. }));
    }

    #[test]
    fn rejects_bad_fields() {
        for bad in [
            ONE.replace("\"mpy\"", "\"\""),
            ONE.replace("0.9", "1.5"),
            ONE.replace("\"u1\"", "\"\""),
            ONE.replace("\"ts_ms\":0", "\"ts_ms\":-4"),
            ONE.replace("}", ",\"extra\":1}"),
        ] {
            assert!(parse_log_str(&bad, &opts()).is_err(), "{bad}");
        }
    }

    #[test]
    fn prompt_budget_keeps_tail_on_char_boundary() {
        assert_eq!(truncate_tail("abcdef".into(), 3), "def");
        assert_eq!(truncate_tail("ab".into(), 3), "ab");
        // 'é' is two bytes; cutting inside it must move forward.
        assert_eq!(truncate_tail("xéz".into(), 2), "z");
        let long = "x".repeat(5000);
        let line = ONE.replace("import nu", &long);
        let store = parse_log_str(&line, &opts()).unwrap();
        assert_eq!(store.sessions()[0].events[0].prompt.len(), DEFAULT_PROMPT_BYTE_BUDGET);
    }

    #[test]
    fn interleaved_programmers_round_trip() {
        let text = concat!(
            r#"{"ts_ms":0,"action":"shown","prompt":"a","suggestion":"b","confidence":0.25,"programmer_id":"u2"}"#, "\n",
            r#"{"ts_ms":0,"action":"shown","prompt":"def f(","suggestion":"x):","confidence":0.5,"programmer_id":"u1"}"#, "\n",
            r#"{"ts_ms":900,"action":"accepted","prompt":"a","suggestion":"b","confidence":0.25,"programmer_id":"u2"}"#, "\n",
            r#"{"ts_ms":4000000,"action":"rejected","prompt":"def f(","suggestion":"x):","confidence":0.5,"programmer_id":"u1"}"#, "\n",
        );
        // u1's reject arrives after a > 30 min gap and is orphaned in a new session.
        assert!(parse_log_str(text, &opts()).is_err());
        let text = text.replace("4000000", "4000");
        let store = parse_log_str(&text, &opts()).unwrap();
        let mut out = Vec::new();
        write_log(&store, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        proptest::string::string_regex("[ -~\\n\\t\"\\\\é]{0,24}").unwrap()
    }

    proptest! {
        #[test]
        fn canonical_round_trip(
            rows in proptest::collection::vec(
                (0u64..5_000_000, arb_text(), arb_text(), 0.0f64..=1.0, 0usize..3), 1..30)
        ) {
            // Build a canonical log of shown events: per-programmer sorted timestamps.
            let mut rows = rows;
            rows.sort_by_key(|r| r.0);
            let mut text = String::new();
            for (ts, prompt, sugg, conf, who) in &rows {
                let sugg = if sugg.is_empty() { "x".to_string() } else { sugg.clone() };
                let rec = RecordRef {
                    ts_ms: *ts,
                    action: ActionKind::Shown,
                    prompt,
                    suggestion: &sugg,
                    confidence: *conf,
                    programmer_id: ["a", "b", "c"][*who],
                };
                text.push_str(&serde_json::to_string(&rec).unwrap());
                text.push('\n');
            }
            let store = parse_log_str(&text, &opts()).unwrap();
            let mut out = Vec::new();
            write_log(&store, &mut out).unwrap();
            prop_assert_eq!(String::from_utf8(out).unwrap(), text);
            prop_assert_eq!(store.event_count(), rows.len());
        }
    }
}
