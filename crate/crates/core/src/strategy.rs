//! Bidder-side decisions: which bitrates to ask for, what to offer, and
//! whether to bid at all.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{utility_total, welfare, BitrateLadder, CostModel, UserProfile, UserState};
use crate::momd::{for_each_vector, BitrateMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipationConfig {
    pub alpha_buf: f64,
    pub alpha_link: f64,
}

impl Default for ParticipationConfig {
    fn default() -> Self {
        ParticipationConfig {
            alpha_buf: 1.0,
            alpha_link: 0.5,
        }
    }
}

impl ParticipationConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [("alpha_buf", self.alpha_buf), ("alpha_link", self.alpha_link)] {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Optimal,
    BufferBased,
    BandwidthBased,
    Hybrid,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Optimal => "optimal",
            PolicyKind::BufferBased => "buffer_based",
            PolicyKind::BandwidthBased => "bandwidth_based",
            PolicyKind::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            PolicyKind::Optimal,
            PolicyKind::BufferBased,
            PolicyKind::BandwidthBased,
            PolicyKind::Hybrid,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown adaptation {s:?} (expected optimal, buffer_based, bandwidth_based or hybrid)"))
    }
}

/// Bitrate-adaptation rule used by the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationPolicy {
    pub kind: PolicyKind,
    /// Fraction of the estimated capacity the bandwidth rule may use.
    #[serde(default = "one")]
    pub bandwidth_safety: f64,
    /// Buffer levels (seconds) at which the buffer rule steps up one
    /// ladder index; `Z − 1` ascending values. Uniform steps when absent.
    #[serde(default)]
    pub buffer_thresholds_s: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl AdaptationPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        AdaptationPolicy {
            kind,
            bandwidth_safety: 1.0,
            buffer_thresholds_s: None,
        }
    }

    pub fn validate(&self, ladder: &BitrateLadder) -> Result<(), ModelError> {
        if !(self.bandwidth_safety > 0.0) || !self.bandwidth_safety.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "bandwidth_safety",
                value: self.bandwidth_safety,
            });
        }
        if let Some(t) = &self.buffer_thresholds_s {
            if t.len() + 1 != ladder.len() || t.windows(2).any(|w| w[0] > w[1]) {
                return Err(ModelError::InvalidLadder(format!(
                    "buffer thresholds must be {} ascending values",
                    ladder.len() - 1
                )));
            }
        }
        Ok(())
    }
}

impl Default for AdaptationPolicy {
    fn default() -> Self {
        AdaptationPolicy::new(PolicyKind::Optimal)
    }
}

/// `g(r) = v(r) − c(r)` for one segment.
fn net_segment_value(profile: &UserProfile, cost: &CostModel, rate: f64) -> f64 {
    profile.segment_quality(rate) - cost.segment(rate)
}

/// Common bitrate of row `κ`: the ladder rate maximising
/// `κ · g(r) − ℓ(R_pre, r)`, lowest on ties.
pub fn optimal_row_rate(
    profile: &UserProfile,
    state: &UserState,
    cost: &CostModel,
    kappa: usize,
) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for &r in profile.ladder.rates() {
        let v = kappa as f64 * net_segment_value(profile, cost, r)
            - profile.segment_degradation(state.prev_bitrate, r);
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, r));
        }
    }
    best.expect("ladder is never empty").1
}

/// Payoff-maximising bitrate matrix under the efficient score function.
///
/// Every row repeats a single rate (non-zero entries of an optimal row are
/// identical), so each row reduces to a scalar search over the ladder.
pub fn optimal_bitrate_matrix(
    profile: &UserProfile,
    state: &UserState,
    cost: &CostModel,
    segments: usize,
) -> BitrateMatrix {
    let rates: Vec<f64> = (1..=segments)
        .map(|k| optimal_row_rate(profile, state, cost, k))
        .collect();
    BitrateMatrix::from_row_rates(&rates)
}

/// Exhaustive optimum of row `κ`: every length-`κ` ladder vector, scored
/// by `U(r) − C(r)`. Returns the best vector and its value.
pub fn brute_force_row(
    profile: &UserProfile,
    state: &UserState,
    cost: &CostModel,
    kappa: usize,
) -> (Vec<f64>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for_each_vector(profile.ladder.rates(), kappa, |v| {
        let w = welfare(cost, profile, state, v).welfare;
        if w > best.1 {
            best = (v.to_vec(), w);
        }
    });
    best
}

/// Truthful prices: `p_κ = U(r_κ)` for every row.
pub fn truthful_price_vector(
    profile: &UserProfile,
    state: &UserState,
    matrix: &BitrateMatrix,
) -> Vec<f64> {
    matrix
        .rows()
        .map(|row| utility_total(profile, state, row))
        .collect()
}

/// Participation filter: a bidder refrains only when the auctioneer's link
/// is both too slow to refill its buffer in time and slower than the share
/// of capacity its neighbours could offer it.
///
/// With no previous segment the buffer threshold is 0 and the bidder always
/// participates. With an empty buffer the buffer threshold is unbounded, so
/// the link condition alone decides.
pub fn should_participate(
    profile: &UserProfile,
    state: &UserState,
    auctioneer_capacity: f64,
    neighbor_capacity_shares: &[f64],
    cfg: &ParticipationConfig,
) -> bool {
    if state.prev_bitrate <= 0.0 {
        return true;
    }
    let too_slow_for_buffer = if state.buffer_s <= 0.0 {
        cfg.alpha_buf > 0.0
    } else {
        auctioneer_capacity < cfg.alpha_buf * state.prev_bitrate * profile.segment_length_s() / state.buffer_s
    };
    let link_threshold = cfg.alpha_link * neighbor_capacity_shares.iter().sum::<f64>();
    !(too_slow_for_buffer && auctioneer_capacity < link_threshold)
}

/// Bitrate chosen by a buffer-, bandwidth-, or hybrid rule. The optimal
/// policy is not a fixed rule and falls back to the hybrid choice here.
pub fn baseline_bitrate(
    policy: &AdaptationPolicy,
    state: &UserState,
    est_capacity: f64,
    ladder: &BitrateLadder,
) -> f64 {
    let bw = bandwidth_rate(policy, est_capacity, ladder);
    let buf = buffer_rate(policy, state, ladder);
    match policy.kind {
        PolicyKind::BandwidthBased => bw,
        PolicyKind::BufferBased => buf,
        PolicyKind::Hybrid | PolicyKind::Optimal => bw.min(buf),
    }
}

fn bandwidth_rate(policy: &AdaptationPolicy, est_capacity: f64, ladder: &BitrateLadder) -> f64 {
    let budget = est_capacity * policy.bandwidth_safety;
    ladder
        .rates()
        .iter()
        .copied()
        .rfind(|r| *r <= budget)
        .unwrap_or(ladder.lowest())
}

fn buffer_rate(policy: &AdaptationPolicy, state: &UserState, ladder: &BitrateLadder) -> f64 {
    let z = ladder.len();
    let index = match &policy.buffer_thresholds_s {
        Some(t) => 1 + t.iter().filter(|th| state.buffer_s >= **th).count(),
        None => (z as f64 * state.buffer_s / ladder.max_buffer_s()).floor() as usize,
    };
    ladder.rates()[index.clamp(1, z) - 1]
}
