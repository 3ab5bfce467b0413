//! Single-object multi-dimensional auction: one segment, bids of
//! `(bitrate, price)`, ranked by the additive score `p − s(r)`.
//!
//! The winner is the highest score and pays the price that would have
//! produced the second-highest score at the winner's own bitrate. Ties go
//! to the lowest bidder id.

use serde::{Deserialize, Serialize};

use crate::error::AuctionError;
use crate::model::{utility_total, welfare, CostModel, UserId, UserProfile, UserState};

/// The bitrate penalty `s(·)` of the score `p − s(r)`. Nondecreasing with
/// `s(0) = 0`; vectors are penalised component-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScoreFunction {
    Zero,
    Linear { per_mbps: f64 },
    /// `s(r) = c(r)`, the auctioneer's own downloading cost.
    Efficient(CostModel),
}

impl ScoreFunction {
    pub fn efficient(cost: CostModel) -> Self {
        ScoreFunction::Efficient(cost)
    }

    pub fn penalty(&self, rate: f64) -> f64 {
        match self {
            ScoreFunction::Zero => 0.0,
            ScoreFunction::Linear { per_mbps } => per_mbps * rate,
            ScoreFunction::Efficient(cost) => cost.segment(rate),
        }
    }

    pub fn penalty_vec(&self, rates: &[f64]) -> f64 {
        match self {
            ScoreFunction::Efficient(cost) => cost.total(rates),
            _ => rates.iter().map(|r| self.penalty(*r)).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomdBid {
    pub bidder: UserId,
    pub bitrate: f64,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomdOutcome {
    pub winner: UserId,
    pub winning_bitrate: f64,
    pub payment: f64,
    /// Highest score among the losing bids.
    pub second_score: f64,
}

pub fn score(bid: &SomdBid, sf: &ScoreFunction) -> f64 {
    bid.price - sf.penalty(bid.bitrate)
}

/// Second-score auction over at least two bids.
pub fn resolve_second_score(
    bids: &[SomdBid],
    sf: &ScoreFunction,
) -> Result<SomdOutcome, AuctionError> {
    if bids.len() < 2 {
        return Err(AuctionError::InsufficientBidders {
            needed: 2,
            got: bids.len(),
        });
    }
    let scored: Vec<(f64, &SomdBid)> = bids.iter().map(|b| (score(b, sf), b)).collect();
    let (best_idx, _) = scored
        .iter()
        .enumerate()
        .fold(None::<(usize, (f64, UserId))>, |acc, (i, (s, b))| match acc {
            Some((_, (bs, bid))) if bs > *s || (bs == *s && bid <= b.bidder) => acc,
            _ => Some((i, (*s, b.bidder))),
        })
        .expect("at least two bids");
    let winner = scored[best_idx].1;
    let second_score = scored
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best_idx)
        .map(|(_, (s, _))| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SomdOutcome {
        winner: winner.bidder,
        winning_bitrate: winner.bitrate,
        payment: second_score + sf.penalty(winner.bitrate),
        second_score,
    })
}

/// Payoff-maximising bid: the ladder bitrate maximising `U(r) − s(r)`
/// (lowest on ties) with the true utility as price.
pub fn optimal_somd_bid(profile: &UserProfile, state: &UserState, sf: &ScoreFunction) -> SomdBid {
    let mut best: Option<(f64, f64)> = None;
    for &r in profile.ladder.rates() {
        let net = utility_total(profile, state, &[r]) - sf.penalty(r);
        if best.is_none_or(|(b, _)| net > b) {
            best = Some((net, r));
        }
    }
    let (_, bitrate) = best.expect("ladder is never empty");
    SomdBid {
        bidder: profile.id,
        bitrate,
        price: utility_total(profile, state, &[bitrate]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomdOptimum {
    pub bidder: UserId,
    pub bitrate: f64,
    pub welfare: f64,
}

/// Exhaustive search over every (bidder, ladder bitrate) pair for the
/// welfare-maximising single-segment allocation.
pub fn brute_force_somd_optimum(
    bidders: &[(UserProfile, UserState)],
    downloader: &CostModel,
) -> Option<SomdOptimum> {
    let mut best: Option<SomdOptimum> = None;
    for (profile, state) in bidders {
        for &r in profile.ladder.rates() {
            let w = welfare(downloader, profile, state, &[r]).welfare;
            let better = match best {
                None => true,
                Some(b) => w > b.welfare || (w == b.welfare && profile.id < b.bidder),
            };
            if better {
                best = Some(SomdOptimum {
                    bidder: profile.id,
                    bitrate: r,
                    welfare: w,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BitrateLadder;

    fn bid(id: u32, bitrate: f64, price: f64) -> SomdBid {
        SomdBid {
            bidder: UserId(id),
            bitrate,
            price,
        }
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&bid(0, 1.0, 5.0), &ScoreFunction::Zero), 5.0);
        let sf = ScoreFunction::Linear { per_mbps: 2.0 };
        assert_eq!(score(&bid(0, 1.0, 5.0), &sf), 3.0);
        assert_eq!(score(&bid(0, 0.0, 0.0), &sf), 0.0);
    }

    #[test]
    fn second_score_two_bidders() {
        let out = resolve_second_score(&[bid(1, 1.0, 3.0), bid(0, 1.0, 5.0)], &ScoreFunction::Zero)
            .unwrap();
        assert_eq!(out.winner, UserId(0));
        assert_eq!(out.payment, 3.0);

        // s(r†) = 1 shifts the payment by one.
        let sf = ScoreFunction::Linear { per_mbps: 1.0 };
        let out = resolve_second_score(&[bid(0, 1.0, 6.0), bid(1, 0.0, 3.0)], &sf).unwrap();
        assert_eq!(out.winner, UserId(0));
        assert_eq!(out.payment, 4.0);
        assert_eq!(out.payment - sf.penalty(out.winning_bitrate), 3.0);
    }

    #[test]
    fn second_score_tie_goes_to_lowest_id() {
        let bids = [bid(7, 1.0, 7.0), bid(3, 2.0, 7.0), bid(1, 1.0, 2.0)];
        let out = resolve_second_score(&bids, &ScoreFunction::Zero).unwrap();
        assert_eq!(out.winner, UserId(3));
        assert_eq!(out.winning_bitrate, 2.0);
        assert_eq!(out.second_score, 7.0);
    }

    #[test]
    fn second_score_needs_two_bids() {
        let err = resolve_second_score(&[bid(0, 1.0, 1.0)], &ScoreFunction::Zero).unwrap_err();
        assert_eq!(err, AuctionError::InsufficientBidders { needed: 2, got: 1 });
    }

    fn quality_only(id: u32, theta: f64) -> UserProfile {
        let mut p = UserProfile::new(UserId(id), BitrateLadder::standard(10.0, 40.0));
        p.theta = theta;
        p
    }

    #[test]
    fn optimal_bid_unconstrained_takes_top_rate() {
        let p = quality_only(0, 1.0);
        let s = UserState::default();
        let b = optimal_somd_bid(&p, &s, &ScoreFunction::Zero);
        assert_eq!(b.bitrate, 2.3);
        assert_eq!(b.price, utility_total(&p, &s, &[2.3]));
    }

    #[test]
    fn optimal_bid_against_efficient_cost() {
        // Maximise 10 ln(1 + r) − 3 r over the ladder:
        // 0.2 → 1.223, 0.4 → 2.165, 0.7 → 3.206, 1.3 → 4.429, 2.3 → 5.039.
        let p = quality_only(0, 1.0);
        let mut downloader = quality_only(1, 0.0);
        downloader.cost_per_mbit = 0.3;
        let sf = ScoreFunction::efficient(downloader.cost_model());
        let b = optimal_somd_bid(&p, &UserState::default(), &sf);
        let oracle = p
            .ladder
            .rates()
            .iter()
            .copied()
            .map(|r| (10.0 * (1.0f64 + r).ln() - 3.0 * r, r))
            .fold((f64::NEG_INFINITY, 0.0), |a, x| if x.0 > a.0 { x } else { a });
        assert_eq!(b.bitrate, oracle.1);
        assert_eq!(b.bitrate, 2.3);
    }

    #[test]
    fn brute_force_single_pair() {
        let mut p = UserProfile::new(UserId(0), BitrateLadder::new(vec![1.0], 10.0, 10.0).unwrap());
        p.theta = 1.0;
        let best = brute_force_somd_optimum(&[(p.clone(), UserState::default())], &p.cost_model())
            .unwrap();
        assert_eq!(best.bidder, UserId(0));
        assert_eq!(best.bitrate, 1.0);
    }

    #[test]
    fn downloader_virtual_bid_wins_over_indifferent_bidders() {
        let mut me = quality_only(0, 1.0);
        me.cost_per_mbit = 0.05;
        let others = [quality_only(1, 0.0), quality_only(2, 0.0)];
        let mut all = vec![(me.clone(), UserState::default())];
        all.extend(others.iter().map(|p| (p.clone(), UserState::default())));
        let best = brute_force_somd_optimum(&all, &me.cost_model()).unwrap();
        assert_eq!(best.bidder, UserId(0));
        assert!(best.welfare > 0.0);
    }
}
