//! Capacity and encounter traces: the canonical CSV interchange format.
//!
//! Capacity rows are `time_s,user_id,capacity_mbps`; encounter rows are
//! `time_s,user_a,user_b,connected`. The header line is optional on input
//! and always written on output. Floats are written in shortest
//! round-trip form, so `parse(emit(t)) == t`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::IoError;

pub const CAPACITY_HEADER: &str = "time_s,user_id,capacity_mbps";
pub const ENCOUNTER_HEADER: &str = "time_s,user_a,user_b,connected";

/// Piecewise-constant capacity of one user; the last value extends forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySeries {
    breakpoints: Vec<(f64, f64)>,
}

impl CapacitySeries {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, String> {
        match breakpoints.first() {
            None => return Err("empty capacity series".into()),
            Some((t, _)) if *t != 0.0 => return Err(format!("first breakpoint at t={t}, expected 0")),
            _ => {}
        }
        if breakpoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err("breakpoint times must be strictly increasing".into());
        }
        if let Some((_, c)) = breakpoints.iter().find(|(_, c)| !c.is_finite() || *c < 0.0) {
            return Err(format!("invalid capacity {c}"));
        }
        Ok(CapacitySeries { breakpoints })
    }

    pub fn constant(capacity_mbps: f64) -> Self {
        CapacitySeries::new(vec![(0.0, capacity_mbps)]).expect("valid constant series")
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    fn segment_index(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|(bt, _)| *bt <= t).saturating_sub(1)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.breakpoints[self.segment_index(t)].1
    }

    /// Time needed from `start` to move `volume_mbit`, or `None` when the
    /// capacity stays at zero before the volume is reached.
    pub fn transfer_time(&self, start: f64, volume_mbit: f64) -> Option<f64> {
        if volume_mbit <= 0.0 {
            return Some(0.0);
        }
        let mut i = self.segment_index(start);
        let mut t = start;
        let mut left = volume_mbit;
        loop {
            let cap = self.breakpoints[i].1;
            match self.breakpoints.get(i + 1) {
                Some(&(next, _)) => {
                    let can = cap * (next - t);
                    if can >= left && cap > 0.0 {
                        return Some(t + left / cap - start);
                    }
                    left -= can;
                    t = next;
                    i += 1;
                }
                None if cap > 0.0 => return Some(t + left / cap - start),
                None => return None,
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapacityTrace {
    pub series: BTreeMap<String, CapacitySeries>,
}

impl CapacityTrace {
    pub fn get(&self, user: &str) -> Option<&CapacitySeries> {
        self.series.get(user)
    }

    pub fn insert(&mut self, user: impl Into<String>, series: CapacitySeries) {
        self.series.insert(user.into(), series);
    }
}

/// Pairwise connectivity toggles. Pairs are stored with the smaller name
/// first; a pair without toggles is disconnected and every user always
/// encounters itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncounterTrace {
    pub pairs: BTreeMap<(String, String), Vec<(f64, bool)>>,
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl EncounterTrace {
    /// Every pair connected from t = 0 onwards.
    pub fn fully_connected<S: AsRef<str>>(users: &[S]) -> Self {
        let mut trace = EncounterTrace::default();
        for (i, a) in users.iter().enumerate() {
            for b in &users[i + 1..] {
                trace.pairs.insert(pair_key(a.as_ref(), b.as_ref()), vec![(0.0, true)]);
            }
        }
        trace
    }

    pub fn push_toggle(&mut self, a: &str, b: &str, time_s: f64, connected: bool) -> Result<(), String> {
        if a == b {
            return Err(format!("self-encounter row for {a}"));
        }
        let toggles = self.pairs.entry(pair_key(a, b)).or_default();
        let prev_state = toggles.last().map(|(_, c)| *c).unwrap_or(false);
        if let Some((t, _)) = toggles.last() {
            if !(time_s > *t) {
                return Err(format!("toggle times for {a}-{b} must be strictly increasing"));
            }
        }
        if prev_state == connected {
            return Err(format!("toggles for {a}-{b} must alternate"));
        }
        toggles.push((time_s, connected));
        Ok(())
    }

    pub fn connected(&self, a: &str, b: &str, t: f64) -> bool {
        if a == b {
            return true;
        }
        let Some(toggles) = self.pairs.get(&pair_key(a, b)) else {
            return false;
        };
        let i = toggles.partition_point(|(tt, _)| *tt <= t);
        i > 0 && toggles[i - 1].1
    }
}

fn records(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn parse_err(path: &str, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, String> {
    let raw = rec.get(i).ok_or_else(|| format!("missing field {name}"))?;
    raw.parse().map_err(|_| format!("invalid {name} {raw:?}"))
}

/// Parse a capacity trace. `known_users`, when given, rejects any other
/// user id. `path` only labels error messages.
pub fn parse_capacity_trace(
    text: &str,
    path: &str,
    known_users: Option<&[String]>,
) -> Result<CapacityTrace, IoError> {
    let mut rows: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut first_line: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rec) in records(text).records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if i == 0 && rec.get(0) == Some("time_s") {
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_err(path, line, format!("expected 3 fields, got {}", rec.len())));
        }
        let t: f64 = field(&rec, 0, "time_s").map_err(|m| parse_err(path, line, m))?;
        let user: String = field(&rec, 1, "user_id").map_err(|m| parse_err(path, line, m))?;
        let cap: f64 = field(&rec, 2, "capacity_mbps").map_err(|m| parse_err(path, line, m))?;
        if let Some(known) = known_users {
            if !known.contains(&user) {
                return Err(parse_err(path, line, format!("unknown user {user}")));
            }
        }
        if !t.is_finite() || t < 0.0 {
            return Err(parse_err(path, line, format!("invalid time {t}")));
        }
        if !cap.is_finite() || cap < 0.0 {
            return Err(parse_err(path, line, format!("negative capacity {cap}")));
        }
        let series = rows.entry(user.clone()).or_default();
        match series.last() {
            None if t != 0.0 => {
                return Err(parse_err(path, line, format!("first row for {user} at t={t}, expected 0")));
            }
            Some((prev, _)) if t <= *prev => {
                return Err(parse_err(path, line, format!("non-monotone time {t} for {user}")));
            }
            _ => {}
        }
        first_line.entry(user).or_insert(line);
        series.push((t, cap));
    }
    let mut trace = CapacityTrace::default();
    for (user, pts) in rows {
        let series = CapacitySeries::new(pts).map_err(|m| parse_err(path, first_line[&user], m))?;
        trace.insert(user, series);
    }
    Ok(trace)
}

pub fn emit_capacity_trace(trace: &CapacityTrace) -> String {
    let mut out = format!("{CAPACITY_HEADER}\n");
    for (user, series) in &trace.series {
        for (t, c) in series.breakpoints() {
            out.push_str(&format!("{t},{user},{c}\n"));
        }
    }
    out
}

pub fn parse_encounter_trace(
    text: &str,
    path: &str,
    known_users: Option<&[String]>,
) -> Result<EncounterTrace, IoError> {
    let mut trace = EncounterTrace::default();
    for (i, rec) in records(text).records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if i == 0 && rec.get(0) == Some("time_s") {
            continue;
        }
        if rec.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 fields, got {}", rec.len())));
        }
        let t: f64 = field(&rec, 0, "time_s").map_err(|m| parse_err(path, line, m))?;
        let a: String = field(&rec, 1, "user_a").map_err(|m| parse_err(path, line, m))?;
        let b: String = field(&rec, 2, "user_b").map_err(|m| parse_err(path, line, m))?;
        let connected = match rec.get(3) {
            Some("1") => true,
            Some("0") => false,
            other => return Err(parse_err(path, line, format!("connected must be 0 or 1, got {other:?}"))),
        };
        if let Some(known) = known_users {
            for u in [&a, &b] {
                if !known.contains(u) {
                    return Err(parse_err(path, line, format!("unknown user {u}")));
                }
            }
        }
        if !t.is_finite() || t < 0.0 {
            return Err(parse_err(path, line, format!("invalid time {t}")));
        }
        trace.push_toggle(&a, &b, t, connected).map_err(|m| parse_err(path, line, m))?;
    }
    Ok(trace)
}

pub fn emit_encounter_trace(trace: &EncounterTrace) -> String {
    let mut out = format!("{ENCOUNTER_HEADER}\n");
    for ((a, b), toggles) in &trace.pairs {
        for (t, c) in toggles {
            out.push_str(&format!("{t},{a},{b},{}\n", u8::from(*c)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_is_constant() {
        let t = parse_capacity_trace("0,A,3.0", "t.csv", None).unwrap();
        let a = t.get("A").unwrap();
        assert_eq!(a.value_at(0.0), 3.0);
        assert_eq!(a.value_at(1e6), 3.0);
    }

    #[test]
    fn two_phase_profile() {
        let t = parse_capacity_trace("0,B,0.3\n100,B,3.0", "t.csv", None).unwrap();
        let b = t.get("B").unwrap();
        assert_eq!(b.value_at(99.9), 0.3);
        assert_eq!(b.value_at(100.0), 3.0);
    }

    #[test]
    fn missing_origin_rejected() {
        let err = parse_capacity_trace("5,A,2.0", "t.csv", None).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn bad_rows_report_line() {
        let text = format!("{CAPACITY_HEADER}\n0,A,1\n3,A,2\n2,A,1\n");
        match parse_capacity_trace(&text, "t.csv", None).unwrap_err() {
            IoError::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("non-monotone"));
            }
            e => panic!("{e}"),
        }
        let err = parse_capacity_trace("0,A,-1", "t.csv", None).unwrap_err();
        assert!(err.to_string().contains("negative"));
        let known = vec!["A".to_string()];
        let err = parse_capacity_trace("0,A,1\n0,Z,1", "t.csv", Some(&known)).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }));
    }

    #[test]
    fn transfer_times() {
        let p = CapacitySeries::new(vec![(0.0, 2.0), (5.0, 4.0)]).unwrap();
        assert_eq!(p.transfer_time(3.0, 0.0), Some(0.0));
        assert_eq!(p.transfer_time(3.0, 4.0), Some(2.0));
        assert_eq!(p.transfer_time(6.0, 4.0), Some(1.0));
        let dead = CapacitySeries::new(vec![(0.0, 1.0), (2.0, 0.0)]).unwrap();
        assert_eq!(dead.transfer_time(0.0, 10.0), None);
        let gap = CapacitySeries::new(vec![(0.0, 0.0), (2.0, 1.0)]).unwrap();
        assert_eq!(gap.transfer_time(0.0, 1.0), Some(3.0));
    }

    #[test]
    fn encounter_toggles() {
        let text = format!("{ENCOUNTER_HEADER}\n0,A,B,1\n10,B,A,0\n");
        let e = parse_encounter_trace(&text, "e.csv", None).unwrap();
        assert!(e.connected("A", "B", 5.0));
        assert!(!e.connected("B", "A", 10.0));
        assert!(e.connected("C", "C", 0.0));
        assert!(!e.connected("A", "C", 0.0));
        let err = parse_encounter_trace("0,A,B,1\n5,A,B,1", "e.csv", None).unwrap_err();
        assert!(err.to_string().contains("alternate"));
    }

    #[test]
    fn round_trips() {
        let t = parse_capacity_trace("0,B,0.3\n100,B,3.0\n0,A,0.1234567891234", "t", None).unwrap();
        assert_eq!(parse_capacity_trace(&emit_capacity_trace(&t), "t", None).unwrap(), t);
        let e = EncounterTrace::fully_connected(&["A", "B", "C"]);
        assert_eq!(parse_encounter_trace(&emit_encounter_trace(&e), "e", None).unwrap(), e);
    }
}
