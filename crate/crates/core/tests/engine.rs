mod common;

use common::{audit, load};
use vidauction::engine::{
    run_comparison, run_simulation, ComparisonCell, Mechanism, SimEventKind, TraceSource,
};
use vidauction::io::{generate_synthetic_traces, CapacitySeries, CapacityTrace, EncounterTrace};
use vidauction::SimError;

fn two_user_run(seed: u64, filter: bool) -> vidauction::engine::SimResult {
    let mut cfg = load("two_user.toml");
    cfg.participation.enabled = filter;
    let caps = generate_synthetic_traces(&cfg.capacity_stats().unwrap(), 1000.0, 1.0, seed).unwrap();
    let sim = cfg.to_sim_config().unwrap();
    let r = run_simulation(&sim, &caps, &cfg.default_encounters()).unwrap();
    assert!(audit(&sim, &r).is_empty(), "{:?}", audit(&sim, &r));
    r
}

/// Segments B's link fetched for A while B was still slow.
fn slow_phase_help(r: &vidauction::engine::SimResult) -> Vec<f64> {
    r.events
        .iter()
        .filter_map(|e| match &e.kind {
            SimEventKind::SegmentDownloaded {
                downloader,
                receiver,
                bitrate,
                duration_s,
                ..
            } if downloader == "B" && receiver == "A" && e.time_s - duration_s < 100.0 => Some(*bitrate),
            _ => None,
        })
        .collect()
}

#[test]
fn slow_neighbour_degrades_fast_user_without_filter() {
    let r = two_user_run(2, false);
    let a = &r.users[0];
    let help = slow_phase_help(&r);
    assert!(!help.is_empty());
    assert!(help.iter().any(|b| *b < a.bitrates.iter().cloned().fold(0.0, f64::max)));
    assert!(a.degradation_events >= 1);
}

#[test]
fn filter_keeps_fast_user_clean() {
    let r = two_user_run(2, true);
    let a = &r.users[0];
    assert!(slow_phase_help(&r).is_empty());
    assert_eq!(a.rebuffer_s, 0.0);
    assert_eq!(a.degradation_events, 0);
}

#[test]
fn lone_user_with_ample_capacity() {
    let mut cfg = load("two_user.toml");
    cfg.users.truncate(1);
    cfg.mechanism = Mechanism::Noncooperative;
    cfg.defaults.cost_per_download_s = 0.0;
    let sim = cfg.to_sim_config().unwrap();
    let mut caps = CapacityTrace::default();
    caps.insert("A", CapacitySeries::constant(2.3));
    let r = run_simulation(&sim, &caps, &EncounterTrace::default()).unwrap();
    let a = &r.users[0];
    assert_eq!(a.rebuffer_s, 0.0);
    assert_eq!(a.bitrates, vec![2.3; 10]);
    assert_eq!(r.degradation_ratio, 0.0);
}

#[test]
fn isolated_users_only_serve_themselves() {
    let mut cfg = load("three_user.toml");
    cfg.traces.encounters = vidauction::io::config::EncounterMode::None;
    let caps = generate_synthetic_traces(&cfg.capacity_stats().unwrap(), 1000.0, 1.0, 5).unwrap();
    let sim = cfg.to_sim_config().unwrap();
    let r = run_simulation(&sim, &caps, &cfg.default_encounters()).unwrap();
    for e in &r.events {
        if let SimEventKind::SegmentDownloaded { downloader, receiver, .. } = &e.kind {
            assert_eq!(downloader, receiver);
        }
    }
    assert!(r.users.iter().all(|u| u.payments_made == u.payments_received));
}

#[test]
fn identical_cells_give_identical_results() {
    let cfg = load("three_user.toml");
    let mut sim = cfg.to_sim_config().unwrap();
    sim.record_events = false;
    let cell = |label: &str| ComparisonCell {
        label: label.into(),
        config: sim.clone(),
    };
    let source = TraceSource::Synthetic {
        stats: cfg.capacity_stats().unwrap(),
        horizon_s: 1000.0,
        step_s: 1.0,
        encounters: cfg.default_encounters(),
    };
    let out = run_comparison(&[cell("a"), cell("b")], &source, 8, 11).unwrap();
    assert_eq!(out.runs[0], out.runs[1]);
    let mut a = out.rows[0].clone();
    a.label = "b".into();
    assert_eq!(a, out.rows[1]);
}

#[test]
fn cooperation_beats_going_alone() {
    let cfg = load("three_user.toml");
    let mut cells = Vec::new();
    for mech in [Mechanism::Noncooperative, Mechanism::Momd] {
        let mut c = cfg.clone();
        c.mechanism = mech;
        c.record_events = false;
        cells.push(ComparisonCell {
            label: mech.as_str().into(),
            config: c.to_sim_config().unwrap(),
        });
    }
    let source = TraceSource::Synthetic {
        stats: cfg.capacity_stats().unwrap(),
        horizon_s: 1000.0,
        step_s: 1.0,
        encounters: cfg.default_encounters(),
    };
    let out = run_comparison(&cells, &source, 30, 100).unwrap();
    assert!(out.rows[1].mean_social_welfare > out.rows[0].mean_social_welfare);
}

#[test]
fn unknown_user_trace_is_underrun() {
    let cfg = load("two_user.toml");
    let mut caps = CapacityTrace::default();
    caps.insert("A", CapacitySeries::constant(3.0));
    let err = run_simulation(&cfg.to_sim_config().unwrap(), &caps, &cfg.default_encounters()).unwrap_err();
    match err {
        SimError::TraceUnderrun { user, .. } => assert_eq!(user, "B"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn dead_link_without_help_is_unreachable() {
    let cfg = load("two_user.toml");
    let mut caps = CapacityTrace::default();
    caps.insert("A", CapacitySeries::constant(3.0));
    caps.insert("B", CapacitySeries::new(vec![(0.0, 1.0), (5.0, 0.0)]).unwrap());
    let mut alone = cfg.clone();
    alone.mechanism = Mechanism::Noncooperative;
    let err = run_simulation(&alone.to_sim_config().unwrap(), &caps, &cfg.default_encounters()).unwrap_err();
    assert!(matches!(err, SimError::UnreachableCompletion { .. }), "{err}");
}
