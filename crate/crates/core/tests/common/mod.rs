#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vidauction::engine::{SimConfig, SimResult};
use vidauction::io::{load_config, ConfigFile};
use vidauction::model::{BitrateLadder, CostModel, UserId, UserProfile, UserState};

pub const RATE_POOL: [f64; 7] = [0.2, 0.4, 0.7, 1.0, 1.3, 1.8, 2.3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load(name: &str) -> ConfigFile {
    load_config(&config_path(name)).expect("shipped config parses")
}

/// Random ladder of `z` rates drawn from the pool, β = 10, B̄ = 40.
pub fn random_ladder(rng: &mut ChaCha8Rng, z: usize) -> BitrateLadder {
    let mut rates: Vec<f64> = RATE_POOL.choose_multiple(rng, z).copied().collect();
    rates.sort_by(f64::total_cmp);
    BitrateLadder::new(rates, 10.0, 40.0).unwrap()
}

pub fn random_profile(rng: &mut ChaCha8Rng, id: u32, ladder: BitrateLadder) -> UserProfile {
    let mut p = UserProfile::new(UserId(id), ladder);
    p.name = format!("u{id}");
    p.theta = rng.random_range(0.2..2.0);
    p.cost_per_mbit = rng.random_range(0.0..0.3);
    p.buffer_gain_scale = rng.random_range(0.0..15.0);
    p.buffer_gain_decay = rng.random_range(0.2..0.9);
    p.degradation_slope = rng.random_range(0.0..3.0);
    p
}

pub fn random_state(rng: &mut ChaCha8Rng, ladder: &BitrateLadder) -> UserState {
    let buffer = if rng.random_bool(0.2) {
        0.0
    } else {
        rng.random_range(0.0..ladder.max_buffer_s())
    };
    let prev = if rng.random_bool(0.2) {
        0.0
    } else {
        *ladder.rates().choose(rng).unwrap()
    };
    UserState::new(buffer, prev)
}

pub fn random_cost(rng: &mut ChaCha8Rng) -> CostModel {
    CostModel {
        per_mbit: rng.random_range(0.0..0.4),
        segment_length_s: 10.0,
    }
}

/// `m` bidders sharing one random ladder of `z` rates.
pub fn random_bidders(rng: &mut ChaCha8Rng, m: usize, z: usize) -> Vec<(UserProfile, UserState)> {
    let ladder = random_ladder(rng, z);
    (0..m)
        .map(|i| {
            let p = random_profile(rng, i as u32, ladder.clone());
            let s = random_state(rng, &ladder);
            (p, s)
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Accounting violations of one run, as human-readable strings.
pub fn audit(cfg: &SimConfig, r: &SimResult) -> Vec<String> {
    let mut bad = Vec::new();
    for a in &r.auctions {
        let paid: f64 = a.awards.iter().map(|w| w.payment).sum();
        if !rel_close(paid, a.received, 1e-12) {
            bad.push(format!("auction at t={}: paid {paid} received {}", a.time_s, a.received));
        }
    }
    let paid: f64 = r.users.iter().map(|u| u.payments_made).sum();
    let received: f64 = r.users.iter().map(|u| u.payments_received).sum();
    if !rel_close(paid, received, 1e-9) {
        bad.push(format!("payments made {paid} != received {received}"));
    }
    for (u, su) in r.users.iter().zip(&cfg.users) {
        let max = su.profile.ladder.max_buffer_s();
        if u.buffer_min_s < -1e-9 || u.buffer_max_s > max + 1e-9 {
            bad.push(format!("{}: buffer range [{}, {}] outside [0, {max}]", u.name, u.buffer_min_s, u.buffer_max_s));
        }
        let expect = u.utility - u.cost - u.payments_made + u.payments_received - u.overhead_energy;
        if !rel_close(expect, u.welfare, 1e-9) {
            bad.push(format!("{}: welfare {} != parts {expect}", u.name, u.welfare));
        }
        if su.watching {
            let total = (cfg.video_length_s / su.profile.segment_length_s()).round() as usize;
            if u.segments != total {
                bad.push(format!("{}: {} of {total} segments", u.name, u.segments));
            }
        }
    }
    let per_user: f64 = r.users.iter().map(|u| u.welfare).sum();
    if !rel_close(per_user, r.social_welfare, 1e-9) {
        bad.push(format!("sum of user welfare {per_user} != social welfare {}", r.social_welfare));
    }
    let parts = r.total_utility - r.total_cost - r.total_overhead_energy;
    if !rel_close(parts, r.social_welfare, 1e-9) {
        bad.push(format!("utility - cost - overhead {parts} != social welfare {}", r.social_welfare));
    }
    bad
}
