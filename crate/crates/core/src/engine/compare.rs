use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_simulation, SimConfig, SimResult};
use crate::error::SimError;
use crate::io::synth::{generate_synthetic_traces, CapacityStats};
use crate::io::trace::{CapacityTrace, EncounterTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub label: String,
    pub config: SimConfig,
}

/// Where each replication's traces come from. Synthetic traces for
/// replication `i` use seed `base_seed + i` and are shared by every cell.
#[derive(Debug, Clone)]
pub enum TraceSource {
    Fixed(CapacityTrace, EncounterTrace),
    Synthetic {
        stats: Vec<CapacityStats>,
        horizon_s: f64,
        step_s: f64,
        encounters: EncounterTrace,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub mechanism: String,
    pub adaptation: String,
    pub segments_per_auction: usize,
    pub overhead_energy_per_auction: f64,
    pub overhead_time_per_auction_s: f64,
    pub participation: bool,
    pub replications: usize,
    pub mean_social_welfare: f64,
    pub std_social_welfare: f64,
    pub mean_rebuffer_ratio: f64,
    pub mean_degradation_ratio: f64,
    pub mean_average_bitrate: f64,
    pub mean_auction_count: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOutput {
    pub rows: Vec<ComparisonRow>,
    /// `runs[cell][replication]`
    pub runs: Vec<Vec<SimResult>>,
}

fn mean(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Run every cell over the same per-replication traces (common random
/// numbers) and aggregate means. Replications run in parallel; results are
/// merged by index so the output does not depend on scheduling.
pub fn run_comparison(
    cells: &[ComparisonCell],
    source: &TraceSource,
    replications: usize,
    base_seed: u64,
) -> Result<ComparisonOutput, SimError> {
    let traces: Vec<(CapacityTrace, EncounterTrace)> = match source {
        TraceSource::Fixed(c, e) => vec![(c.clone(), e.clone()); replications],
        TraceSource::Synthetic {
            stats,
            horizon_s,
            step_s,
            encounters,
        } => (0..replications)
            .into_par_iter()
            .map(|i| {
                generate_synthetic_traces(stats, *horizon_s, *step_s, base_seed + i as u64)
                    .map(|c| (c, encounters.clone()))
                    .map_err(|e| SimError::Config(e.to_string()))
            })
            .collect::<Result<_, _>>()?,
    };
    let runs: Vec<Vec<SimResult>> = cells
        .par_iter()
        .map(|cell| {
            traces
                .par_iter()
                .map(|(c, e)| run_simulation(&cell.config, c, e))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let rows = cells
        .iter()
        .zip(&runs)
        .map(|(cell, rs)| {
            let cfg = &cell.config;
            let (w, wsd) = mean(rs.iter().map(|r| r.social_welfare));
            ComparisonRow {
                label: cell.label.clone(),
                mechanism: cfg.mechanism.as_str().into(),
                adaptation: cfg.adaptation.kind.as_str().into(),
                segments_per_auction: cfg.segments_per_auction,
                overhead_energy_per_auction: cfg.overhead_energy_per_auction,
                overhead_time_per_auction_s: cfg.overhead_time_per_auction_s,
                participation: cfg.participation_enabled,
                replications: rs.len(),
                mean_social_welfare: w,
                std_social_welfare: wsd,
                mean_rebuffer_ratio: mean(rs.iter().map(|r| r.rebuffer_ratio)).0,
                mean_degradation_ratio: mean(rs.iter().map(|r| r.degradation_ratio)).0,
                mean_average_bitrate: mean(rs.iter().map(|r| r.average_bitrate)).0,
                mean_auction_count: mean(rs.iter().map(|r| r.auction_count as f64)).0,
            }
        })
        .collect();
    Ok(ComparisonOutput { rows, runs })
}
