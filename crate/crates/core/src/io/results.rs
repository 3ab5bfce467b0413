//! Result tables in CSV or JSON-lines.
//!
//! Column order is fixed per table. Every float is written with 6
//! significant digits ([`format_sig`]); re-parsing a written value gives
//! exactly [`round_sig`] of the original.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::engine::{ComparisonRow, SimResult};
use crate::error::IoError;

pub const SIGNIFICANT_DIGITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "json-lines" => Ok(OutputFormat::JsonLines),
            _ => Err(format!("unknown format {s:?} (expected csv or jsonl)")),
        }
    }
}

/// `x` with `SIGNIFICANT_DIGITS` significant digits, plain decimal where
/// reasonable and scientific otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exp: i32 = sci.split('e').nth(1).and_then(|e| e.parse().ok()).unwrap_or(0);
    if !(-5..15).contains(&exp) {
        return sci;
    }
    let rounded: f64 = sci.parse().expect("formatted float parses");
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    let plain = format!("{rounded:.decimals$}");
    if plain.contains('.') {
        plain.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        plain
    }
}

pub fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().expect("formatted float parses")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(round_sig(*x)).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::from(*b),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

/// A header plus rows of cells, in a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
                w.write_record(&self.header).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
            }
            OutputFormat::JsonLines => {
                let mut out = String::new();
                for row in &self.rows {
                    let obj: Map<String, Value> = self
                        .header
                        .iter()
                        .zip(row)
                        .map(|(h, c)| (h.to_string(), c.json()))
                        .collect();
                    out.push_str(&Value::Object(obj).to_string());
                    out.push('\n');
                }
                out
            }
        }
    }
}

pub fn summary_table(result: &SimResult) -> Table {
    Table {
        header: vec![
            "social_welfare",
            "total_utility",
            "total_cost",
            "total_overhead_energy",
            "rebuffer_ratio",
            "degradation_ratio",
            "average_bitrate",
            "auction_count",
            "assumption1_violations",
            "end_time_s",
        ],
        rows: vec![vec![
            Cell::Num(result.social_welfare),
            Cell::Num(result.total_utility),
            Cell::Num(result.total_cost),
            Cell::Num(result.total_overhead_energy),
            Cell::Num(result.rebuffer_ratio),
            Cell::Num(result.degradation_ratio),
            Cell::Num(result.average_bitrate),
            Cell::Int(result.auction_count as u64),
            Cell::Int(result.assumption1_violations as u64),
            Cell::Num(result.end_time_s),
        ]],
    }
}

pub fn users_table(result: &SimResult) -> Table {
    Table {
        header: vec![
            "user",
            "watching",
            "segments",
            "welfare",
            "utility",
            "rebuffer_penalty",
            "cost",
            "payments_made",
            "payments_received",
            "overhead_energy",
            "average_bitrate",
            "rebuffer_s",
            "stall_events",
            "degradation_volume",
            "degradation_events",
            "completion_time_s",
            "downloads",
        ],
        rows: result
            .users
            .iter()
            .map(|u| {
                vec![
                    Cell::Text(u.name.clone()),
                    Cell::Bool(u.watching),
                    Cell::Int(u.segments as u64),
                    Cell::Num(u.welfare),
                    Cell::Num(u.utility),
                    Cell::Num(u.rebuffer_penalty),
                    Cell::Num(u.cost),
                    Cell::Num(u.payments_made),
                    Cell::Num(u.payments_received),
                    Cell::Num(u.overhead_energy),
                    Cell::Num(u.average_bitrate),
                    Cell::Num(u.rebuffer_s),
                    Cell::Int(u.stall_events as u64),
                    Cell::Num(u.degradation_volume),
                    Cell::Int(u.degradation_events as u64),
                    u.completion_time_s.map_or(Cell::Empty, Cell::Num),
                    Cell::Int(u.downloads as u64),
                ]
            })
            .collect(),
    }
}

pub fn comparison_table(rows: &[ComparisonRow]) -> Table {
    Table {
        header: vec![
            "label",
            "mechanism",
            "adaptation",
            "K",
            "overhead_energy_per_auction",
            "overhead_time_per_auction_s",
            "participation",
            "replications",
            "mean_social_welfare",
            "std_social_welfare",
            "mean_rebuffer_ratio",
            "mean_degradation_ratio",
            "mean_average_bitrate",
            "mean_auction_count",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Text(r.label.clone()),
                    Cell::Text(r.mechanism.clone()),
                    Cell::Text(r.adaptation.clone()),
                    Cell::Int(r.segments_per_auction as u64),
                    Cell::Num(r.overhead_energy_per_auction),
                    Cell::Num(r.overhead_time_per_auction_s),
                    Cell::Bool(r.participation),
                    Cell::Int(r.replications as u64),
                    Cell::Num(r.mean_social_welfare),
                    Cell::Num(r.std_social_welfare),
                    Cell::Num(r.mean_rebuffer_ratio),
                    Cell::Num(r.mean_degradation_ratio),
                    Cell::Num(r.mean_average_bitrate),
                    Cell::Num(r.mean_auction_count),
                ]
            })
            .collect(),
    }
}

/// One JSON object per event, full precision.
pub fn emit_events_jsonl(result: &SimResult) -> String {
    let mut out = String::new();
    for e in &result.events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    std::fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write `summary.*`, `users.*` and optionally `events.jsonl` into `dir`.
pub fn write_result(
    dir: &Path,
    result: &SimResult,
    format: OutputFormat,
    events: bool,
) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let ext = format.extension();
    let mut written = Vec::new();
    for (stem, table) in [("summary", summary_table(result)), ("users", users_table(result))] {
        let path = dir.join(format!("{stem}.{ext}"));
        write_file(&path, &table.render(format))?;
        written.push(path);
    }
    if events {
        let path = dir.join("events.jsonl");
        write_file(&path, &emit_events_jsonl(result))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(16.93923456), "16.9392");
        assert_eq!(format_sig(0.0026), "0.0026");
        assert_eq!(format_sig(-1234567.0), "-1234570");
        assert_eq!(format_sig(3.0), "3");
        assert_eq!(format_sig(1.5e-9), "1.50000e-9");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(9.9999996), "10");
    }

    #[test]
    fn empty_comparison_has_header_only() {
        let csv = comparison_table(&[]).render(OutputFormat::Csv);
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("label,mechanism,"));
        assert_eq!(comparison_table(&[]).render(OutputFormat::JsonLines), "");
    }

    #[test]
    fn csv_quotes_text() {
        let t = Table {
            header: vec!["a", "b"],
            rows: vec![vec![Cell::Text("x,y".into()), Cell::Num(0.1 + 0.2)]],
        };
        assert_eq!(t.render(OutputFormat::Csv), "a,b\n\"x,y\",0.3\n");
        assert_eq!(t.render(OutputFormat::JsonLines), "{\"a\":\"x,y\",\"b\":0.3}\n");
    }
}
