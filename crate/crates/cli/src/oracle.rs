//! `oracle` subcommand: brute-force optima of small instances, checked
//! against the mechanism outcome.
//!
//! Instances are TOML. `--kind matrix` reads raw marginal-score sequences:
//!
//! ```toml
//! K = 4
//! marginal_scores = [[8, 7, 5, 2], [9, 6, 3, 2], [4, 4, 3, 1]]
//! ```
//!
//! `--kind somd` and `--kind momd` read bidder profiles and states; the
//! first bidder is the auctioneer, whose cost prices every download:
//!
//! ```toml
//! K = 2
//! [defaults]
//! theta = 1.0
//! cost_per_mbit = 0.05
//!
//! [[bidders]]
//! name = "A"
//! buffer_s = 10.0
//! prev_bitrate = 1.3
//! ```

use std::path::Path;

use clap::ValueEnum;
use serde::Deserialize;

use vidauction::io::{format_sig, ConfigFile, UserDefaults, UserEntry};
use vidauction::model::{welfare, CostModel, UserProfile, UserState};
use vidauction::momd::{
    allocate_marginal, brute_force_marginal, brute_force_momd_optimum, resolve_vickrey_score,
    MomdBid, BRUTE_FORCE_MAX_BIDDERS, BRUTE_FORCE_MAX_SEGMENTS,
};
use vidauction::somd::{brute_force_somd_optimum, optimal_somd_bid, resolve_second_score, ScoreFunction};
use vidauction::strategy::{optimal_bitrate_matrix, truthful_price_vector};
use vidauction::{AuctionError, UserId};

use crate::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Somd,
    Momd,
    Matrix,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Instance {
    #[serde(rename = "K", default = "one")]
    segments: usize,
    #[serde(default)]
    marginal_scores: Vec<Vec<f64>>,
    /// Auctioneer link capacity for the airtime part of the cost.
    downloader_capacity_mbps: Option<f64>,
    #[serde(default)]
    defaults: UserDefaults,
    #[serde(default)]
    bidders: Vec<Bidder>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bidder {
    name: String,
    #[serde(default)]
    buffer_s: f64,
    #[serde(default)]
    prev_bitrate: f64,
    theta: Option<f64>,
    cost_per_mbit: Option<f64>,
    cost_per_download_s: Option<f64>,
    buffer_gain_scale: Option<f64>,
    buffer_gain_decay: Option<f64>,
    degradation_slope: Option<f64>,
}

/// Relative tolerance for welfare sums accumulated in different orders.
const WELFARE_TOL: f64 = 1e-9;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= WELFARE_TOL * a.abs().max(b.abs()).max(1.0)
}

fn load(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn bidders(inst: &Instance) -> Result<(Vec<(UserProfile, UserState)>, CostModel), CliError> {
    if inst.bidders.is_empty() {
        return Err(CliError::Config("instance has no bidders".into()));
    }
    let users = inst
        .bidders
        .iter()
        .map(|b| {
            let mut u = UserEntry::new(b.name.clone());
            u.theta = b.theta;
            u.cost_per_mbit = b.cost_per_mbit;
            u.cost_per_download_s = b.cost_per_download_s;
            u.buffer_gain_scale = b.buffer_gain_scale;
            u.buffer_gain_decay = b.buffer_gain_decay;
            u.degradation_slope = b.degradation_slope;
            u
        })
        .collect();
    let cfg = ConfigFile {
        defaults: inst.defaults.clone(),
        users,
        ..ConfigFile::parse("").expect("empty config parses")
    };
    let profiles = cfg.profiles().map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = Vec::new();
    for (p, b) in profiles.into_iter().zip(&inst.bidders) {
        let state = UserState::new(b.buffer_s, b.prev_bitrate);
        state
            .validate(&p.ladder)
            .map_err(|e| CliError::Config(format!("bidder {}: {e}", b.name)))?;
        out.push((p, state));
    }
    let d = &out[0].0;
    let cost = match inst.downloader_capacity_mbps {
        Some(c) => d.estimated_cost_model(c),
        None => d.cost_model(),
    };
    Ok((out, cost))
}

fn guard(m: usize, k: usize) -> Result<(), CliError> {
    if m > BRUTE_FORCE_MAX_BIDDERS || k > BRUTE_FORCE_MAX_SEGMENTS {
        return Err(CliError::SizeGuard(
            AuctionError::SizeGuard(format!(
                "M={m}, K={k}; limits are M<={BRUTE_FORCE_MAX_BIDDERS}, K<={BRUTE_FORCE_MAX_SEGMENTS}"
            ))
            .to_string(),
        ));
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format_sig(*x)).collect();
    format!("[{}]", parts.join(" "))
}

fn verdict(mech: f64, oracle: f64) {
    println!(
        "mechanism_welfare={} oracle_welfare={} verdict={}",
        format_sig(mech),
        format_sig(oracle),
        if same(mech, oracle) { "equal" } else { "different" }
    );
}

fn matrix(inst: &Instance) -> Result<(), CliError> {
    let k = inst.segments;
    let seqs = &inst.marginal_scores;
    guard(seqs.len(), k)?;
    let slices: Vec<&[f64]> = seqs.iter().map(Vec::as_slice).collect();
    let best = brute_force_marginal(&slices, k);
    println!("oracle_allocation={:?} oracle_score={}", best.allocation, format_sig(best.welfare));
    let ids: Vec<(UserId, &[f64])> = slices
        .iter()
        .enumerate()
        .map(|(i, s)| (UserId(i as u32), *s))
        .collect();
    let alloc = allocate_marginal(&ids, k).map_err(|e| CliError::Config(e.to_string()))?;
    println!("mechanism_allocation={:?}", alloc.counts);
    for (i, (won, damage)) in alloc.counts.iter().zip(&alloc.damages).enumerate() {
        println!("bidder {i}: segments={won} score_damage={}", format_sig(*damage));
    }
    let mech: f64 = slices
        .iter()
        .zip(&alloc.counts)
        .map(|(s, won)| s[..*won].iter().sum::<f64>())
        .sum();
    verdict(mech, best.welfare);
    Ok(())
}

fn somd(inst: &Instance) -> Result<(), CliError> {
    let (bidders, cost) = bidders(inst)?;
    let best = brute_force_somd_optimum(&bidders, &cost).expect("at least one bidder");
    println!(
        "oracle: bidder={} bitrate={} welfare={}",
        bidders[best.bidder.0 as usize].0.name,
        format_sig(best.bitrate),
        format_sig(best.welfare)
    );
    let sf = ScoreFunction::efficient(cost);
    let bids: Vec<_> = bidders.iter().map(|(p, s)| optimal_somd_bid(p, s, &sf)).collect();
    let (winner, rate, payment) = if bids.len() < 2 {
        // Lone auctioneer: self-allocation, nothing to pay.
        (bids[0].bidder, bids[0].bitrate, 0.0)
    } else {
        let o = resolve_second_score(&bids, &sf).map_err(|e| CliError::Config(e.to_string()))?;
        (o.winner, o.winning_bitrate, o.payment)
    };
    let (p, s) = &bidders[winner.0 as usize];
    println!(
        "mechanism: bidder={} bitrate={} payment={}",
        p.name,
        format_sig(rate),
        format_sig(payment)
    );
    verdict(welfare(&cost, p, s, &[rate]).welfare, best.welfare);
    Ok(())
}

fn momd(inst: &Instance) -> Result<(), CliError> {
    let (bidders, cost) = bidders(inst)?;
    let k = inst.segments;
    guard(bidders.len(), k)?;
    let best = brute_force_momd_optimum(&bidders, &cost, k).map_err(|e| CliError::SizeGuard(e.to_string()))?;
    println!("oracle_allocation={:?} oracle_welfare={}", best.allocation, format_sig(best.welfare));
    for ((p, _), rates) in bidders.iter().zip(&best.bitrates) {
        println!("oracle {}: {}", p.name, fmt_vec(rates));
    }
    let sf = ScoreFunction::efficient(cost);
    let bids = bidders
        .iter()
        .map(|(p, s)| {
            let m = optimal_bitrate_matrix(p, s, &cost, k);
            let prices = truthful_price_vector(p, s, &m);
            MomdBid::new(p.id, m, prices)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let outcome = resolve_vickrey_score(&bids, &sf, k).map_err(|e| CliError::Config(e.to_string()))?;
    println!("mechanism_allocation={:?}", outcome.allocation());
    let mut mech = 0.0;
    for ((p, s), a) in bidders.iter().zip(&outcome.awards) {
        mech += welfare(&cost, p, s, &a.bitrates).welfare;
        println!(
            "mechanism {}: {} payment={}",
            p.name,
            fmt_vec(&a.bitrates),
            format_sig(a.payment)
        );
    }
    if !outcome.guaranteed() {
        println!("note: marginal scores not decreasing for {:?}", outcome.assumption1_violations);
    }
    verdict(mech, best.welfare);
    Ok(())
}

pub fn run(path: &Path, kind: Kind) -> Result<(), CliError> {
    let inst = load(path)?;
    match kind {
        Kind::Matrix => matrix(&inst),
        Kind::Somd => somd(&inst),
        Kind::Momd => momd(&inst),
    }
}
