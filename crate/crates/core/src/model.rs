//! User model: bitrate ladders, per-user parameters and state, and the
//! utility / cost / welfare functions every auction and the simulator are
//! built on.
//!
//! All quantities share one dimensionless utility unit. Bitrates are in
//! Mbps, times and buffer levels in seconds of playback.
//!
//! Concrete functional forms:
//!
//! - quality gain per segment: `v(r) = θ · β · ln(1 + r)`
//! - buffer gain for `κ` segments at buffer `B`: `γ · Σ_{j=1..κ} ρ^(B/β + j − 1)`
//! - degradation loss between consecutive segments: `λ · max(0, r_prev − r)`
//! - downloader cost per segment: `(cost_per_mbit + cost_per_download_s / ĥ) · r · β`,
//!   where `ĥ` is the downloader's capacity estimate (the second term is
//!   dropped when no estimate is supplied)

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Number of completed downloads averaged by [`CapacityWindow`].
pub const CAPACITY_WINDOW: usize = 3;

/// Identifier used for users and bidders. Ties in every auction are broken
/// in favour of the lowest id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub u32);

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LadderRepr", into = "LadderRepr")]
pub struct BitrateLadder {
    rates: Vec<f64>,
    segment_length_s: f64,
    max_buffer_s: f64,
}

#[derive(Serialize, Deserialize)]
struct LadderRepr {
    rates: Vec<f64>,
    segment_length_s: f64,
    max_buffer_s: f64,
}

impl TryFrom<LadderRepr> for BitrateLadder {
    type Error = ModelError;

    fn try_from(r: LadderRepr) -> Result<Self, Self::Error> {
        BitrateLadder::new(r.rates, r.segment_length_s, r.max_buffer_s)
    }
}

impl From<BitrateLadder> for LadderRepr {
    fn from(l: BitrateLadder) -> Self {
        LadderRepr {
            rates: l.rates,
            segment_length_s: l.segment_length_s,
            max_buffer_s: l.max_buffer_s,
        }
    }
}

impl BitrateLadder {
    pub fn new(
        rates: Vec<f64>,
        segment_length_s: f64,
        max_buffer_s: f64,
    ) -> Result<Self, ModelError> {
        if rates.is_empty() {
            return Err(ModelError::InvalidLadder("ladder has no rates".into()));
        }
        if rates.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(ModelError::InvalidLadder(
                "rates must be finite and positive".into(),
            ));
        }
        if rates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidLadder(
                "rates must be strictly increasing".into(),
            ));
        }
        if !segment_length_s.is_finite() || segment_length_s <= 0.0 {
            return Err(ModelError::InvalidLadder(format!(
                "segment length {segment_length_s} must be positive"
            )));
        }
        if !max_buffer_s.is_finite() || max_buffer_s < segment_length_s {
            return Err(ModelError::InvalidLadder(format!(
                "max buffer {max_buffer_s} must be at least one segment ({segment_length_s})"
            )));
        }
        Ok(BitrateLadder {
            rates,
            segment_length_s,
            max_buffer_s,
        })
    }

    /// The ladder used throughout the experiments: {0.2, 0.4, 0.7, 1.3, 2.3} Mbps.
    pub fn standard(segment_length_s: f64, max_buffer_s: f64) -> Self {
        Self::new(vec![0.2, 0.4, 0.7, 1.3, 2.3], segment_length_s, max_buffer_s)
            .expect("standard ladder is valid")
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn lowest(&self) -> f64 {
        self.rates[0]
    }

    pub fn highest(&self) -> f64 {
        self.rates[self.rates.len() - 1]
    }

    pub fn segment_length_s(&self) -> f64 {
        self.segment_length_s
    }

    pub fn max_buffer_s(&self) -> f64 {
        self.max_buffer_s
    }

    pub fn contains(&self, rate: f64) -> bool {
        self.rates.contains(&rate)
    }
}

/// Static per-user parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    #[serde(default)]
    pub name: String,
    pub ladder: BitrateLadder,
    /// Desire for high quality video (θ).
    pub theta: f64,
    /// Volume component of the downloader cost, per megabit.
    pub cost_per_mbit: f64,
    /// Airtime component of the downloader cost, per second of cellular
    /// download. Only charged when a capacity estimate is available.
    #[serde(default)]
    pub cost_per_download_s: f64,
    /// γ
    pub buffer_gain_scale: f64,
    /// ρ, in (0, 1)
    pub buffer_gain_decay: f64,
    /// λ
    pub degradation_slope: f64,
}

impl UserProfile {
    /// A profile with every coefficient zero except a buffer decay of 0.5.
    pub fn new(id: UserId, ladder: BitrateLadder) -> Self {
        UserProfile {
            id,
            name: id.to_string(),
            ladder,
            theta: 0.0,
            cost_per_mbit: 0.0,
            cost_per_download_s: 0.0,
            buffer_gain_scale: 0.0,
            buffer_gain_decay: 0.5,
            degradation_slope: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let nonneg = [
            ("theta", self.theta),
            ("cost_per_mbit", self.cost_per_mbit),
            ("cost_per_download_s", self.cost_per_download_s),
            ("buffer_gain_scale", self.buffer_gain_scale),
            ("degradation_slope", self.degradation_slope),
        ];
        for (name, value) in nonneg {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        let rho = self.buffer_gain_decay;
        if !(rho > 0.0 && rho < 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "buffer_gain_decay",
                value: rho,
            });
        }
        Ok(())
    }

    pub fn segment_length_s(&self) -> f64 {
        self.ladder.segment_length_s
    }

    /// Single-segment quality gain `v(r, θ)`.
    pub fn segment_quality(&self, rate: f64) -> f64 {
        self.theta * self.ladder.segment_length_s * rate.ln_1p()
    }

    /// Single-segment degradation loss `ℓ(r̂, r)`.
    pub fn segment_degradation(&self, prev: f64, rate: f64) -> f64 {
        if prev < rate {
            0.0
        } else {
            self.degradation_slope * (prev - rate)
        }
    }

    /// Buffer-gain gap `Δ(κ, B) = V(κ + 1, B) − V(κ, B) = γ · ρ^(B/β + κ)`.
    pub fn buffer_gap(&self, kappa: usize, buffer_s: f64) -> f64 {
        let exponent = buffer_s / self.ladder.segment_length_s + kappa as f64;
        self.buffer_gain_scale * self.buffer_gain_decay.powf(exponent)
    }

    /// Cost model of this user acting as a downloader with no capacity
    /// estimate (volume cost only).
    pub fn cost_model(&self) -> CostModel {
        CostModel {
            per_mbit: self.cost_per_mbit,
            segment_length_s: self.ladder.segment_length_s,
        }
    }

    /// Cost model of this user acting as a downloader whose link is
    /// expected to deliver `capacity_mbps`.
    pub fn estimated_cost_model(&self, capacity_mbps: f64) -> CostModel {
        let airtime = if self.cost_per_download_s > 0.0 {
            self.cost_per_download_s / capacity_mbps
        } else {
            0.0
        };
        CostModel {
            per_mbit: self.cost_per_mbit + airtime,
            segment_length_s: self.ladder.segment_length_s,
        }
    }
}

/// Linear per-segment downloader cost `c(r) = per_mbit · r · β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub per_mbit: f64,
    pub segment_length_s: f64,
}

impl CostModel {
    pub fn segment(&self, rate: f64) -> f64 {
        self.per_mbit * rate * self.segment_length_s
    }

    pub fn total(&self, rates: &[f64]) -> f64 {
        rates.iter().map(|r| self.segment(*r)).sum()
    }
}

/// Sliding window over the average capacities of recent downloads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CapacityWindow {
    samples: VecDeque<f64>,
}

impl CapacityWindow {
    pub fn record(&mut self, capacity_mbps: f64) {
        if self.samples.len() == CAPACITY_WINDOW {
            self.samples.pop_front();
        }
        self.samples.push_back(capacity_mbps);
    }

    pub fn mean(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().sum::<f64>() / self.samples.len() as f64)
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Dynamic per-user state at the moment an auction is evaluated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    /// Current buffer level in seconds of playback.
    pub buffer_s: f64,
    /// Bitrate of the segment preceding the ones being allocated; 0 before
    /// the first segment.
    pub prev_bitrate: f64,
    #[serde(default)]
    pub capacity_history: CapacityWindow,
}

impl UserState {
    pub fn new(buffer_s: f64, prev_bitrate: f64) -> Self {
        UserState {
            buffer_s,
            prev_bitrate,
            capacity_history: CapacityWindow::default(),
        }
    }

    pub fn validate(&self, ladder: &BitrateLadder) -> Result<(), ModelError> {
        if !(0.0..=ladder.max_buffer_s).contains(&self.buffer_s) {
            return Err(ModelError::InvalidState(format!(
                "buffer {} outside [0, {}]",
                self.buffer_s, ladder.max_buffer_s
            )));
        }
        if self.prev_bitrate != 0.0 && !ladder.contains(self.prev_bitrate) {
            return Err(ModelError::InvalidState(format!(
                "previous bitrate {} not on the ladder",
                self.prev_bitrate
            )));
        }
        Ok(())
    }
}

/// Sequence of segment bitrates allocated in one downloading operation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BitrateVector(pub Vec<f64>);

impl BitrateVector {
    pub fn uniform(rate: f64, count: usize) -> Self {
        BitrateVector(vec![rate; count])
    }
}

impl std::ops::Deref for BitrateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for BitrateVector {
    fn from(v: Vec<f64>) -> Self {
        BitrateVector(v)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WelfareBreakdown {
    pub quality_gain: f64,
    pub buffer_gain: f64,
    pub degradation_loss: f64,
    pub cost: f64,
    pub welfare: f64,
}

impl WelfareBreakdown {
    pub fn utility(&self) -> f64 {
        self.quality_gain + self.buffer_gain - self.degradation_loss
    }
}

/// Total downloader cost of a bitrate vector, volume component only.
pub fn cost_total(downloader: &UserProfile, rates: &[f64]) -> f64 {
    downloader.cost_model().total(rates)
}

pub fn quality_gain(receiver: &UserProfile, rates: &[f64]) -> f64 {
    rates.iter().map(|r| receiver.segment_quality(*r)).sum()
}

pub fn buffer_gain(receiver: &UserProfile, kappa: usize, buffer_s: f64) -> f64 {
    let base = buffer_s / receiver.ladder.segment_length_s;
    (1..=kappa)
        .map(|j| receiver.buffer_gain_decay.powf(base + (j - 1) as f64))
        .sum::<f64>()
        * receiver.buffer_gain_scale
}

pub fn degradation_loss(receiver: &UserProfile, prev_bitrate: f64, rates: &[f64]) -> f64 {
    let mut prev = prev_bitrate;
    let mut loss = 0.0;
    for &r in rates {
        loss += receiver.segment_degradation(prev, r);
        prev = r;
    }
    loss
}

pub fn utility_total(receiver: &UserProfile, state: &UserState, rates: &[f64]) -> f64 {
    welfare_parts(receiver, state, rates).utility()
}

/// Welfare generated when a downloader with cost model `cost` fetches
/// `rates` for `receiver`.
pub fn welfare(
    cost: &CostModel,
    receiver: &UserProfile,
    state: &UserState,
    rates: &[f64],
) -> WelfareBreakdown {
    let mut parts = welfare_parts(receiver, state, rates);
    parts.cost = cost.total(rates);
    parts.welfare = parts.utility() - parts.cost;
    parts
}

fn welfare_parts(receiver: &UserProfile, state: &UserState, rates: &[f64]) -> WelfareBreakdown {
    let quality_gain = quality_gain(receiver, rates);
    let buffer_gain = buffer_gain(receiver, rates.len(), state.buffer_s);
    let degradation_loss = degradation_loss(receiver, state.prev_bitrate, rates);
    WelfareBreakdown {
        quality_gain,
        buffer_gain,
        degradation_loss,
        cost: 0.0,
        welfare: quality_gain + buffer_gain - degradation_loss,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> UserProfile {
        let mut p = UserProfile::new(UserId(0), BitrateLadder::standard(10.0, 40.0));
        p.theta = 1.0;
        p.buffer_gain_scale = 10.0;
        p.buffer_gain_decay = 0.5;
        p.degradation_slope = 1.0;
        p
    }

    #[test]
    fn ladder_rejects_bad_input() {
        assert!(BitrateLadder::new(vec![], 10.0, 40.0).is_err());
        assert!(BitrateLadder::new(vec![0.4, 0.2], 10.0, 40.0).is_err());
        assert!(BitrateLadder::new(vec![0.4, 0.4], 10.0, 40.0).is_err());
        assert!(BitrateLadder::new(vec![0.0, 0.4], 10.0, 40.0).is_err());
        assert!(BitrateLadder::new(vec![0.4], 0.0, 40.0).is_err());
        assert!(BitrateLadder::new(vec![0.4], 10.0, 5.0).is_err());
        assert!(BitrateLadder::new(vec![0.4], 10.0, 10.0).is_ok());
    }

    #[test]
    fn profile_validation() {
        let mut p = profile();
        assert!(p.validate().is_ok());
        p.buffer_gain_decay = 1.0;
        assert!(p.validate().is_err());
        p.buffer_gain_decay = 0.5;
        p.theta = -1.0;
        assert!(p.validate().is_err());
        p.theta = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn state_validation() {
        let ladder = BitrateLadder::standard(10.0, 40.0);
        assert!(UserState::new(0.0, 0.0).validate(&ladder).is_ok());
        assert!(UserState::new(40.0, 2.3).validate(&ladder).is_ok());
        assert!(UserState::new(41.0, 2.3).validate(&ladder).is_err());
        assert!(UserState::new(10.0, 1.0).validate(&ladder).is_err());
    }

    #[test]
    fn cost_examples() {
        let mut p = profile();
        assert_eq!(cost_total(&p, &[2.3, 1.3]), 0.0);
        p.cost_per_mbit = 0.1;
        assert!((cost_total(&p, &[2.3]) - 2.3).abs() < 1e-12);
        assert!((cost_total(&p, &[0.7, 1.3]) - 2.0).abs() < 1e-12);
        assert_eq!(cost_total(&p, &[]), 0.0);
    }

    #[test]
    fn estimated_cost_adds_airtime() {
        let mut p = profile();
        p.cost_per_mbit = 0.05;
        p.cost_per_download_s = 0.3;
        let c = p.estimated_cost_model(3.0);
        assert!((c.per_mbit - 0.15).abs() < 1e-12);
        assert_eq!(p.cost_model().per_mbit, 0.05);
    }

    #[test]
    fn quality_examples() {
        let mut p = profile();
        assert_eq!(quality_gain(&p, &[0.0]), 0.0);
        assert!((quality_gain(&p, &[2.3]) - 11.939_224_684_724_347).abs() < 1e-9);
        p.theta = 0.0;
        assert_eq!(quality_gain(&p, &[2.3, 1.3]), 0.0);
    }

    #[test]
    fn buffer_gain_examples() {
        let mut p = profile();
        assert_eq!(buffer_gain(&p, 0, 10.0), 0.0);
        assert_eq!(buffer_gain(&p, 2, 0.0), 15.0);
        p.buffer_gain_scale = 0.0;
        assert_eq!(buffer_gain(&p, 3, 5.0), 0.0);
    }

    #[test]
    fn degradation_examples() {
        let p = profile();
        assert_eq!(degradation_loss(&p, 0.7, &[1.3]), 0.0);
        assert_eq!(degradation_loss(&p, 1.3, &[1.3, 1.3]), 0.0);
        assert!((degradation_loss(&p, 2.3, &[0.7, 1.3]) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn utility_and_welfare_examples() {
        let mut p = profile();
        let s = UserState::new(0.0, 0.0);
        assert_eq!(utility_total(&p, &s, &[]), 0.0);
        // 10 ln 3.3 + γ ρ^0 − 0 = 11.939 + 10
        let u = utility_total(&p, &s, &[2.3]);
        assert!((u - 21.939_224_684_724_347).abs() < 1e-9);

        let w = welfare(&p.cost_model(), &p, &s, &[]);
        assert_eq!(w, WelfareBreakdown::default());
        let w = welfare(&p.cost_model(), &p, &s, &[2.3]);
        assert_eq!(w.welfare, u);

        p.cost_per_mbit = 0.1;
        let w = welfare(&p.cost_model(), &p, &s, &[2.3]);
        assert!((w.welfare - 19.639_224_684_724_347).abs() < 1e-9);
        assert_eq!(
            w.welfare,
            w.quality_gain + w.buffer_gain - w.degradation_loss - w.cost
        );
    }

    #[test]
    fn capacity_window_keeps_last_three() {
        let mut w = CapacityWindow::default();
        assert_eq!(w.mean(), None);
        for c in [1.0, 2.0, 3.0, 6.0] {
            w.record(c);
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.mean(), Some(11.0 / 3.0));
    }
}
