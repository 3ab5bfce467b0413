//! Trace-driven discrete-event simulator.
//!
//! Every user owns one cellular link. Whenever a link runs out of queued
//! downloads its owner auctions the next segment downloads among the users
//! it currently encounters (itself included), then fetches the won
//! segments one after another and hands them to their receivers. Receivers
//! play back at 1 s/s and stall when the next segment has not arrived.
//!
//! A run is single-threaded and deterministic: events are ordered by
//! `(time, insertion sequence)` and the traces are the only input.

mod compare;
mod sim;

use serde::{Deserialize, Serialize};

use crate::error::{AuctionError, SimError};
use crate::io::trace::CapacitySeries;
use crate::model::{UserId, UserProfile};
use crate::strategy::{AdaptationPolicy, ParticipationConfig};

pub use compare::{run_comparison, ComparisonCell, ComparisonOutput, ComparisonRow, TraceSource};
pub use sim::run_simulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Second-score auction, one segment per auction.
    Somd,
    /// Vickrey-score auction over `K` segments.
    Momd,
    /// Price-only second-price auction; bitrate fixed by the adaptation
    /// policy, one segment per auction.
    #[serde(rename = "vickrey_1d")]
    Vickrey1d,
    /// Every user downloads its own segments over its own link.
    Noncooperative,
}

impl Mechanism {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Somd => "somd",
            Mechanism::Momd => "momd",
            Mechanism::Vickrey1d => "vickrey_1d",
            Mechanism::Noncooperative => "noncooperative",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "somd" => Ok(Mechanism::Somd),
            "momd" => Ok(Mechanism::Momd),
            "vickrey_1d" => Ok(Mechanism::Vickrey1d),
            "noncooperative" => Ok(Mechanism::Noncooperative),
            _ => Err(format!(
                "unknown mechanism {s:?} (expected somd, momd, vickrey_1d or noncooperative)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimUser {
    pub profile: UserProfile,
    /// Watches a video of `video_length_s`; otherwise only serves others.
    pub watching: bool,
    /// Keeps auctioning its link after its own video is fully assigned.
    /// Non-watching users always help.
    pub helper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// `users[i].profile.id` must be `UserId(i)`; names key the traces.
    pub users: Vec<SimUser>,
    /// K
    pub segments_per_auction: usize,
    pub mechanism: Mechanism,
    pub adaptation: AdaptationPolicy,
    pub participation: ParticipationConfig,
    pub participation_enabled: bool,
    pub video_length_s: f64,
    pub overhead_energy_per_auction: f64,
    /// Idle link time between announcing an auction and resolving it.
    pub overhead_time_per_auction_s: f64,
    /// Device-to-device handoff delay; 0 delivers instantly.
    pub d2d_delay_s: f64,
    /// Utility lost per second of stalled playback.
    pub rebuffer_penalty_per_s: f64,
    /// How long a link waits before retrying when nobody can bid.
    pub idle_retry_s: f64,
    /// Abort if the last video is not finished by this time.
    pub max_time_s: f64,
    /// Recorded for provenance; the simulation itself draws no randomness.
    pub seed: u64,
    pub record_events: bool,
}

impl SimConfig {
    pub fn new(users: Vec<SimUser>, mechanism: Mechanism) -> Self {
        SimConfig {
            users,
            segments_per_auction: 1,
            mechanism,
            adaptation: AdaptationPolicy::default(),
            participation: ParticipationConfig::default(),
            participation_enabled: false,
            video_length_s: 100.0,
            overhead_energy_per_auction: 0.0,
            overhead_time_per_auction_s: 0.0,
            d2d_delay_s: 0.0,
            rebuffer_penalty_per_s: 0.0,
            idle_retry_s: 1.0,
            max_time_s: 100_000.0,
            seed: 0,
            record_events: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.segments_per_auction == 0 {
            return bad("K must be at least 1".into());
        }
        if matches!(self.mechanism, Mechanism::Somd | Mechanism::Vickrey1d) && self.segments_per_auction != 1 {
            return bad(format!("{} allocates one segment per auction; K must be 1", self.mechanism.as_str()));
        }
        let nonneg = [
            ("video_length_s", self.video_length_s),
            ("overhead_energy_per_auction", self.overhead_energy_per_auction),
            ("overhead_time_per_auction_s", self.overhead_time_per_auction_s),
            ("d2d_delay_s", self.d2d_delay_s),
            ("rebuffer_penalty_per_s", self.rebuffer_penalty_per_s),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if !(self.idle_retry_s > 0.0) || !(self.max_time_s > 0.0) {
            return bad("idle_retry_s and max_time_s must be positive".into());
        }
        self.participation.validate()?;
        let mut names = std::collections::BTreeSet::new();
        for (i, u) in self.users.iter().enumerate() {
            u.profile.validate()?;
            self.adaptation.validate(&u.profile.ladder)?;
            if u.profile.id != UserId(i as u32) {
                return bad(format!("user {} has id {}, expected {i}", u.profile.name, u.profile.id));
            }
            if !names.insert(u.profile.name.as_str()) {
                return bad(format!("duplicate user name {}", u.profile.name));
            }
            let beta = u.profile.segment_length_s();
            let segs = self.video_length_s / beta;
            if (segs - segs.round()).abs() > 1e-9 {
                return bad(format!(
                    "video_length_s {} is not a multiple of {}'s segment length {beta}",
                    self.video_length_s, u.profile.name
                ));
            }
        }
        Ok(())
    }
}

/// Smallest `τ` with `∫_t^{t+τ} h = rate · β`.
pub fn download_duration(
    series: &CapacitySeries,
    start_s: f64,
    rate: f64,
    segment_length_s: f64,
    user: &str,
) -> Result<f64, SimError> {
    series
        .transfer_time(start_s, rate * segment_length_s)
        .ok_or_else(|| SimError::UnreachableCompletion {
            user: user.to_string(),
            time_s: start_s,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwardRecord {
    pub receiver: String,
    pub bitrates: Vec<f64>,
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEventKind {
    AuctionStart { auctioneer: String, bidders: Vec<String> },
    AuctionResolved { auctioneer: String, awards: Vec<AwardRecord> },
    SegmentDownloaded { downloader: String, receiver: String, seq: usize, bitrate: f64, duration_s: f64 },
    SegmentDelivered { receiver: String, seq: usize, bitrate: f64, buffer_s: f64 },
    PlaybackStallStart { user: String },
    PlaybackStallEnd { user: String, stalled_s: f64 },
    VideoComplete { user: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time_s: f64,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: SimEventKind,
}

/// Money flow of one resolved auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionRecord {
    pub time_s: f64,
    pub auctioneer: String,
    pub awards: Vec<AwardRecord>,
    /// Total credited to the auctioneer.
    pub received: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub name: String,
    pub watching: bool,
    pub segments: usize,
    /// Auction-time utility of every received segment, minus the rebuffer
    /// penalty.
    pub utility: f64,
    pub rebuffer_penalty: f64,
    /// Realized cost of every download this user's link performed.
    pub cost: f64,
    pub payments_made: f64,
    pub payments_received: f64,
    pub overhead_energy: f64,
    /// `utility − cost − payments_made + payments_received − overhead_energy`
    pub welfare: f64,
    pub average_bitrate: f64,
    pub bitrate_sum: f64,
    pub rebuffer_s: f64,
    pub stall_events: usize,
    pub degradation_volume: f64,
    pub degradation_events: usize,
    pub buffer_min_s: f64,
    pub buffer_max_s: f64,
    pub completion_time_s: Option<f64>,
    pub downloads: usize,
    /// Received bitrates in playback order.
    pub bitrates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub users: Vec<UserResult>,
    /// `Σ utility − Σ cost − auction_count · overhead_energy_per_auction`
    pub social_welfare: f64,
    pub total_utility: f64,
    pub total_cost: f64,
    pub total_overhead_energy: f64,
    /// Mean over watching users of stall seconds / video length.
    pub rebuffer_ratio: f64,
    /// Pooled over watching users: Σ bitrate drops / Σ bitrates.
    pub degradation_ratio: f64,
    pub average_bitrate: f64,
    pub auction_count: usize,
    pub assumption1_violations: usize,
    pub end_time_s: f64,
    pub auctions: Vec<AuctionRecord>,
    pub events: Vec<SimEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBid {
    pub bidder: UserId,
    pub bitrate: f64,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VickreyOutcome {
    pub winner: UserId,
    pub bitrate: f64,
    pub payment: f64,
}

/// Price-only second-price auction: the highest price wins (lowest id on
/// ties) and pays the second-highest price.
pub fn single_dimensional_vickrey_baseline(bids: &[PriceBid]) -> Result<VickreyOutcome, AuctionError> {
    if bids.len() < 2 {
        return Err(AuctionError::InsufficientBidders {
            needed: 2,
            got: bids.len(),
        });
    }
    let best = vickrey_winner(bids).expect("non-empty");
    let second = bids
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, b)| b.price)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(VickreyOutcome {
        winner: bids[best].bidder,
        bitrate: bids[best].bitrate,
        payment: second,
    })
}

fn vickrey_winner(bids: &[PriceBid]) -> Option<usize> {
    (0..bids.len()).reduce(|a, b| {
        let (x, y) = (&bids[a], &bids[b]);
        if y.price > x.price || (y.price == x.price && y.bidder < x.bidder) {
            b
        } else {
            a
        }
    })
}

/// Σ max(0, r_{i−1} − r_i) over consecutive segments.
pub fn degradation_volume(bitrates: &[f64]) -> f64 {
    bitrates.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum()
}

/// Bitrate-drop volume divided by the sum of received bitrates; 0 for an
/// empty sequence.
pub fn degradation_ratio(bitrates: &[f64]) -> f64 {
    let total: f64 = bitrates.iter().sum();
    if total > 0.0 {
        degradation_volume(bitrates) / total
    } else {
        0.0
    }
}

pub fn rebuffer_ratio(stall_s: f64, video_length_s: f64) -> f64 {
    if video_length_s > 0.0 {
        stall_s / video_length_s
    } else {
        0.0
    }
}
