use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{ActionKind, TelemetryStore};

/// Dataset statistics. `acceptance_rate` is accepts over shown events and is
/// absent when nothing was shown.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub shown: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub browsed: usize,
    pub sessions: usize,
    pub programmers: usize,
    pub sessions_per_programmer: BTreeMap<String, usize>,
    pub mean_session_duration_ms: f64,
    pub median_session_duration_ms: f64,
    pub acceptance_rate: Option<f64>,
}

pub fn summarize(store: &TelemetryStore) -> Summary {
    let mut counts = [0usize; 4];
    let mut per_programmer: BTreeMap<String, usize> = BTreeMap::new();
    let mut durations: Vec<u64> = Vec::with_capacity(store.sessions().len());
    for s in store.sessions() {
        for e in &s.events {
            counts[e.action.index()] += 1;
        }
        *per_programmer.entry(s.programmer_id.clone()).or_default() += 1;
        durations.push(s.duration_ms());
    }
    durations.sort_unstable();
    let mean = if durations.is_empty() {
        0.0
    } else {
        durations.iter().map(|&d| d as f64).sum::<f64>() / durations.len() as f64
    };
    let median = match durations.len() {
        0 => 0.0,
        n if n % 2 == 1 => durations[n / 2] as f64,
        n => (durations[n / 2 - 1] as f64 + durations[n / 2] as f64) / 2.0,
    };
    let shown = counts[ActionKind::Shown.index()];
    let accepted = counts[ActionKind::Accepted.index()];
    Summary {
        shown,
        accepted,
        rejected: counts[ActionKind::Rejected.index()],
        browsed: counts[ActionKind::Browsed.index()],
        sessions: store.sessions().len(),
        programmers: per_programmer.len(),
        sessions_per_programmer: per_programmer,
        mean_session_duration_ms: mean,
        median_session_duration_ms: median,
        acceptance_rate: (shown > 0).then(|| accepted as f64 / shown as f64),
    }
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rate = self
            .acceptance_rate
            .map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"));
        writeln!(s, "shown events:        {}", self.shown).unwrap();
        writeln!(s, "accepted:            {}", self.accepted).unwrap();
        writeln!(s, "rejected:            {}", self.rejected).unwrap();
        writeln!(s, "browsed:             {}", self.browsed).unwrap();
        writeln!(s, "acceptance rate:     {rate}").unwrap();
        writeln!(s, "programmers:         {}", self.programmers).unwrap();
        writeln!(s, "sessions:            {}", self.sessions).unwrap();
        writeln!(s, "mean session (s):    {:.1}", self.mean_session_duration_ms / 1000.0).unwrap();
        writeln!(s, "median session (s):  {:.1}", self.median_session_duration_ms / 1000.0).unwrap();
        s
    }

    /// Two-column `metric,value` CSV followed by per-programmer session counts.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        let rate = self.acceptance_rate.map_or_else(String::new, |r| r.to_string());
        for (k, v) in [
            ("shown", self.shown.to_string()),
            ("accepted", self.accepted.to_string()),
            ("rejected", self.rejected.to_string()),
            ("browsed", self.browsed.to_string()),
            ("acceptance_rate", rate),
            ("programmers", self.programmers.to_string()),
            ("sessions", self.sessions.to_string()),
            ("mean_session_duration_ms", self.mean_session_duration_ms.to_string()),
            ("median_session_duration_ms", self.median_session_duration_ms.to_string()),
        ] {
            writeln!(s, "{k},{v}").unwrap();
        }
        for (id, n) in &self.sessions_per_programmer {
            writeln!(s, "sessions[{id}],{n}").unwrap();
        }
        s
    }
}
