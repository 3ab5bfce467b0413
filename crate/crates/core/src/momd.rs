//! Multi-object multi-dimensional auction.
//!
//! Each bidder submits a lower-triangular bitrate matrix (row `κ` holds the
//! bitrates it wants if it receives `κ` segments) and one total price per
//! row. Rows are turned into scores `φ_κ = p_κ − s(r_κ)` and then into
//! marginal scores `S_κ = φ_κ − φ_{κ−1}`. The `K` segments go to the `K`
//! highest marginal scores; a winner of `κ̃` segments pays `s(r_κ̃)` plus
//! the score damage it inflicts, i.e. the `κ̃` lowest of the top-`K`
//! marginal scores among the other bidders.
//!
//! Ties in the top-`K` selection are broken by (score desc, bidder id asc,
//! row index asc).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::AuctionError;
use crate::model::{welfare, CostModel, UserId, UserProfile, UserState};
use crate::somd::ScoreFunction;

/// Brute-force size guard: at most this many bidders, segments, and ladder
/// rates.
pub const BRUTE_FORCE_MAX_BIDDERS: usize = 4;
pub const BRUTE_FORCE_MAX_SEGMENTS: usize = 4;
pub const BRUTE_FORCE_MAX_RATES: usize = 5;

/// Lower-triangular bitrate matrix stored row by row; row `κ` (1-based)
/// holds exactly `κ` positive bitrates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct BitrateMatrix {
    rows: Vec<Vec<f64>>,
}

impl BitrateMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, String> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(format!("row {} has {} entries, expected {}", i + 1, row.len(), i + 1));
            }
            if row.iter().any(|r| !r.is_finite() || *r <= 0.0) {
                return Err(format!("row {} has a non-positive bitrate", i + 1));
            }
        }
        Ok(BitrateMatrix { rows })
    }

    /// Matrix whose row `κ` repeats `rates[κ − 1]`.
    pub fn from_row_rates(rates: &[f64]) -> Self {
        BitrateMatrix {
            rows: rates
                .iter()
                .enumerate()
                .map(|(i, r)| vec![*r; i + 1])
                .collect(),
        }
    }

    pub fn segments(&self) -> usize {
        self.rows.len()
    }

    /// Row `κ`, 1-based. Row 0 is the empty allocation.
    pub fn row(&self, kappa: usize) -> &[f64] {
        if kappa == 0 {
            &[]
        } else {
            &self.rows[kappa - 1]
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(Vec::as_slice)
    }

    /// Dense `K × K` form with zeros above the diagonal.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let k = self.rows.len();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = row.clone();
                dense.resize(k, 0.0);
                dense
            })
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for BitrateMatrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        // Accept both the triangular and the zero-padded dense form.
        let trimmed = rows
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| {
                if row.len() > i + 1 {
                    if row[i + 1..].iter().any(|r| *r != 0.0) {
                        return Err(format!("row {} has a non-zero entry above the diagonal", i + 1));
                    }
                    row.truncate(i + 1);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, _>>()?;
        BitrateMatrix::new(trimmed)
    }
}

impl From<BitrateMatrix> for Vec<Vec<f64>> {
    fn from(m: BitrateMatrix) -> Self {
        m.rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomdBid {
    pub bidder: UserId,
    pub matrix: BitrateMatrix,
    /// Total price for receiving `κ` segments, `κ = 1..=K`.
    pub prices: Vec<f64>,
}

impl MomdBid {
    pub fn new(bidder: UserId, matrix: BitrateMatrix, prices: Vec<f64>) -> Result<Self, AuctionError> {
        if matrix.segments() != prices.len() {
            return Err(AuctionError::MalformedBid {
                bidder: bidder.0,
                reason: format!(
                    "{} matrix rows but {} prices",
                    matrix.segments(),
                    prices.len()
                ),
            });
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return Err(AuctionError::MalformedBid {
                bidder: bidder.0,
                reason: "non-finite price".into(),
            });
        }
        Ok(MomdBid {
            bidder,
            matrix,
            prices,
        })
    }

    pub fn segments(&self) -> usize {
        self.prices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalScoreSeq(pub Vec<f64>);

impl MarginalScoreSeq {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Cumulative sums, i.e. the row scores `φ_κ`.
    pub fn cumulative(&self) -> Vec<f64> {
        self.0
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    }
}

/// Score of one row: `p − s(r)`.
pub fn momd_score(rates: &[f64], price: f64, sf: &ScoreFunction) -> f64 {
    price - sf.penalty_vec(rates)
}

pub fn row_scores(bid: &MomdBid, sf: &ScoreFunction) -> Vec<f64> {
    bid.prices
        .iter()
        .enumerate()
        .map(|(i, p)| momd_score(bid.matrix.row(i + 1), *p, sf))
        .collect()
}

pub fn marginal_scores(bid: &MomdBid, sf: &ScoreFunction) -> MarginalScoreSeq {
    let phi = row_scores(bid, sf);
    let mut prev = 0.0;
    MarginalScoreSeq(
        phi.into_iter()
            .map(|p| {
                let s = p - prev;
                prev = p;
                s
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumption1Check {
    pub holds: bool,
    /// 1-based index of the first violating entry.
    pub first_violation: Option<usize>,
}

/// Checks that a marginal-score sequence is non-negative and non-increasing.
pub fn validate_assumption1(seq: &MarginalScoreSeq) -> Assumption1Check {
    let s = seq.as_slice();
    for k in 0..s.len() {
        let increasing = k + 1 < s.len() && s[k] < s[k + 1];
        if s[k] < 0.0 || increasing {
            return Assumption1Check {
                holds: false,
                first_violation: Some(k + 1),
            };
        }
    }
    Assumption1Check {
        holds: true,
        first_violation: None,
    }
}

/// Per-bidder slice of an auction outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidderAward {
    pub bidder: UserId,
    /// Number of segments won (κ̃).
    pub segments: usize,
    /// Row κ̃ of the bidder's matrix; empty when nothing was won.
    pub bitrates: Vec<f64>,
    /// Sum of the displaced marginal scores of the other bidders.
    pub score_damage: f64,
    /// `s(r_κ̃) + score_damage`; zero when nothing was won.
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomdOutcome {
    /// Receiver of each segment, in order of decreasing marginal score.
    pub per_segment_winners: Vec<UserId>,
    /// One entry per bid, in bid order.
    pub awards: Vec<BidderAward>,
    /// Bidders whose marginal scores are not non-negative and non-increasing; the
    /// truthfulness and efficiency guarantees do not cover them.
    pub assumption1_violations: Vec<UserId>,
}

impl MomdOutcome {
    pub fn award(&self, bidder: UserId) -> Option<&BidderAward> {
        self.awards.iter().find(|a| a.bidder == bidder)
    }

    pub fn allocation(&self) -> Vec<usize> {
        self.awards.iter().map(|a| a.segments).collect()
    }

    pub fn guaranteed(&self) -> bool {
        self.assumption1_violations.is_empty()
    }
}

/// Allocation computed from marginal scores alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalAllocation {
    pub per_segment_winners: Vec<UserId>,
    /// Segments won per input sequence, in input order.
    pub counts: Vec<usize>,
    /// Score damage per input sequence (0 for losers).
    pub damages: Vec<f64>,
}

fn rank(a: &(f64, UserId, usize), b: &(f64, UserId, usize)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

/// Top-`K` selection and score-damage computation over raw marginal
/// scores.
pub fn allocate_marginal(
    seqs: &[(UserId, &[f64])],
    segments: usize,
) -> Result<MarginalAllocation, AuctionError> {
    let mut entries: Vec<(f64, UserId, usize)> = seqs
        .iter()
        .flat_map(|(id, s)| s.iter().enumerate().map(move |(k, v)| (*v, *id, k)))
        .collect();
    if entries.len() < segments {
        return Err(AuctionError::InsufficientMarginalScores {
            needed: segments,
            got: entries.len(),
        });
    }
    entries.sort_by(rank);
    let top = &entries[..segments];

    let mut counts = vec![0usize; seqs.len()];
    let per_segment_winners: Vec<UserId> = top.iter().map(|e| e.1).collect();
    for (i, (id, _)) in seqs.iter().enumerate() {
        counts[i] = top.iter().filter(|e| e.1 == *id).count();
    }

    let damages = seqs
        .iter()
        .zip(&counts)
        .map(|((id, _), &won)| {
            if won == 0 {
                return 0.0;
            }
            // Others' top-K, padded with zeros, then the `won` lowest of them.
            let mut others: Vec<f64> = entries
                .iter()
                .filter(|e| e.1 != *id)
                .take(segments)
                .map(|e| e.0)
                .collect();
            others.resize(segments, 0.0);
            others[segments - won..].iter().sum()
        })
        .collect();

    Ok(MarginalAllocation {
        per_segment_winners,
        counts,
        damages,
    })
}

/// Vickrey-score auction for `segments` segments.
pub fn resolve_vickrey_score(
    bids: &[MomdBid],
    sf: &ScoreFunction,
    segments: usize,
) -> Result<MomdOutcome, AuctionError> {
    if bids.is_empty() && segments > 0 {
        return Err(AuctionError::InsufficientBidders { needed: 1, got: 0 });
    }
    let margins: Vec<MarginalScoreSeq> = bids.iter().map(|b| marginal_scores(b, sf)).collect();
    let seqs: Vec<(UserId, &[f64])> = bids
        .iter()
        .zip(&margins)
        .map(|(b, m)| (b.bidder, m.as_slice()))
        .collect();
    let alloc = allocate_marginal(&seqs, segments)?;

    let awards = bids
        .iter()
        .enumerate()
        .map(|(i, bid)| {
            let won = alloc.counts[i];
            if won == 0 {
                return BidderAward {
                    bidder: bid.bidder,
                    segments: 0,
                    bitrates: Vec::new(),
                    score_damage: 0.0,
                    payment: 0.0,
                };
            }
            let bitrates = bid.matrix.row(won).to_vec();
            let damage = alloc.damages[i];
            BidderAward {
                bidder: bid.bidder,
                segments: won,
                payment: sf.penalty_vec(&bitrates) + damage,
                bitrates,
                score_damage: damage,
            }
        })
        .collect();

    let assumption1_violations = bids
        .iter()
        .zip(&margins)
        .filter(|(_, m)| !validate_assumption1(m).holds)
        .map(|(b, _)| b.bidder)
        .collect();

    Ok(MomdOutcome {
        per_segment_winners: alloc.per_segment_winners,
        awards,
        assumption1_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomdOptimum {
    /// Segments per bidder, in input order.
    pub allocation: Vec<usize>,
    pub bitrates: Vec<Vec<f64>>,
    pub welfare: f64,
}

fn size_guard(bidders: usize, segments: usize, rates: usize) -> Result<(), AuctionError> {
    if bidders > BRUTE_FORCE_MAX_BIDDERS
        || segments > BRUTE_FORCE_MAX_SEGMENTS
        || rates > BRUTE_FORCE_MAX_RATES
    {
        return Err(AuctionError::SizeGuard(format!(
            "M={bidders}, K={segments}, Z={rates}; limits are M<={BRUTE_FORCE_MAX_BIDDERS}, \
             K<={BRUTE_FORCE_MAX_SEGMENTS}, Z<={BRUTE_FORCE_MAX_RATES}"
        )));
    }
    Ok(())
}

/// Calls `f` on every length-`len` vector over `alphabet`, in
/// lexicographic index order.
pub fn for_each_vector(alphabet: &[f64], len: usize, mut f: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; len];
    let mut buf: Vec<f64> = vec![alphabet.first().copied().unwrap_or(0.0); len];
    loop {
        for (b, i) in buf.iter_mut().zip(&idx) {
            *b = alphabet[*i];
        }
        f(&buf);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < alphabet.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Calls `f` on every way of writing `total` as an ordered sum of `parts`
/// non-negative integers.
pub fn for_each_composition(total: usize, parts: usize, mut f: impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, left: usize, parts: usize, f: &mut dyn FnMut(&[usize])) {
        if buf.len() + 1 == parts {
            buf.push(left);
            f(buf);
            buf.pop();
            return;
        }
        for k in 0..=left {
            buf.push(k);
            rec(buf, left - k, parts, f);
            buf.pop();
        }
    }
    if parts == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    rec(&mut Vec::with_capacity(parts), total, parts, &mut f);
}

/// Best value of `value(row)` over every length-`kappa` ladder vector.
fn best_vector(rates: &[f64], kappa: usize, mut value: impl FnMut(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for_each_vector(rates, kappa, |v| {
        let w = value(v);
        if w > best.0 {
            best = (w, v.to_vec());
        }
    });
    best
}

fn compose(
    per_bidder: &[Vec<(f64, Vec<f64>)>],
    segments: usize,
) -> MomdOptimum {
    let mut best: Option<MomdOptimum> = None;
    for_each_composition(segments, per_bidder.len(), |alloc| {
        let w: f64 = alloc
            .iter()
            .zip(per_bidder)
            .map(|(k, table)| table[*k].0)
            .sum();
        if best.as_ref().is_none_or(|b| w > b.welfare) {
            best = Some(MomdOptimum {
                allocation: alloc.to_vec(),
                bitrates: alloc
                    .iter()
                    .zip(per_bidder)
                    .map(|(k, table)| table[*k].1.clone())
                    .collect(),
                welfare: w,
            });
        }
    });
    best.unwrap_or(MomdOptimum {
        allocation: Vec::new(),
        bitrates: Vec::new(),
        welfare: 0.0,
    })
}

/// Exhaustive welfare-maximising allocation of `segments` segments: every
/// composition of the segment count over the bidders, and per bidder every
/// ladder-bitrate vector for its share.
pub fn brute_force_momd_optimum(
    bidders: &[(UserProfile, UserState)],
    downloader: &CostModel,
    segments: usize,
) -> Result<MomdOptimum, AuctionError> {
    let max_rates = bidders.iter().map(|(p, _)| p.ladder.len()).max().unwrap_or(0);
    size_guard(bidders.len(), segments, max_rates)?;
    let per_bidder: Vec<Vec<(f64, Vec<f64>)>> = bidders
        .iter()
        .map(|(p, s)| {
            (0..=segments)
                .map(|k| best_vector(p.ladder.rates(), k, |v| welfare(downloader, p, s, v).welfare))
                .collect()
        })
        .collect();
    Ok(compose(&per_bidder, segments))
}

/// Brute-force optimum when every bidder's rows are fixed: each bidder may
/// only receive row `κ` of its own matrix.
pub fn brute_force_fixed_rows(
    bidders: &[(UserProfile, UserState, BitrateMatrix)],
    downloader: &CostModel,
    segments: usize,
) -> Result<MomdOptimum, AuctionError> {
    size_guard(bidders.len(), segments, 0)?;
    let per_bidder: Vec<Vec<(f64, Vec<f64>)>> = bidders
        .iter()
        .map(|(p, s, m)| {
            (0..=segments)
                .map(|k| {
                    if k > m.segments() {
                        (f64::NEG_INFINITY, Vec::new())
                    } else {
                        let row = m.row(k);
                        (welfare(downloader, p, s, row).welfare, row.to_vec())
                    }
                })
                .collect()
        })
        .collect();
    Ok(compose(&per_bidder, segments))
}

/// Brute-force allocation maximising the summed row scores of raw
/// marginal-score sequences.
pub fn brute_force_marginal(seqs: &[&[f64]], segments: usize) -> MomdOptimum {
    let per_bidder: Vec<Vec<(f64, Vec<f64>)>> = seqs
        .iter()
        .map(|s| {
            let mut acc = 0.0;
            let mut table = vec![(0.0, Vec::new())];
            for k in 0..segments {
                match s.get(k) {
                    Some(v) => {
                        acc += v;
                        table.push((acc, Vec::new()));
                    }
                    None => table.push((f64::NEG_INFINITY, Vec::new())),
                }
            }
            table
        })
        .collect();
    compose(&per_bidder, segments)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Ladder rate at which the condition first fails.
    pub violating_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientConditionReport {
    /// Quality gain covers downloading cost at every ladder rate.
    pub nonnegative: ConditionResult,
    /// `2K · c(R^Z) + ℓ(R^Z, 0) ≤ |Δ̃|`.
    pub nonincreasing: ConditionResult,
}

impl SufficientConditionReport {
    pub fn pass(&self) -> bool {
        self.nonnegative.pass && self.nonincreasing.pass
    }
}

/// Tightest negative bound on `Δ(κ + 1, B) − Δ(κ, B)` over every gap
/// inside a `K`-segment allocation and every buffer level. Specific to the
/// geometric buffer gain: the gap `γ ρ^(B/β + κ) (ρ − 1)` is closest to
/// zero at the largest `κ` (`K − 2`) and the fullest buffer. `None` when
/// `K < 2` (no gaps).
pub fn tightest_buffer_gap(bidder: &UserProfile, segments: usize) -> Option<f64> {
    if segments < 2 {
        return None;
    }
    let kappa = segments - 2;
    let full = bidder.ladder.max_buffer_s();
    Some(bidder.buffer_gap(kappa + 1, full) - bidder.buffer_gap(kappa, full))
}

/// Evaluates the two sufficient conditions for non-negative, non-increasing marginal scores on a
/// (downloader, bidder) pair.
pub fn check_sufficient_conditions(
    downloader: &CostModel,
    bidder: &UserProfile,
    segments: usize,
) -> SufficientConditionReport {
    let mut nonnegative = ConditionResult {
        pass: true,
        lhs: 0.0,
        rhs: 0.0,
        violating_rate: None,
    };
    for &r in bidder.ladder.rates() {
        let gain = bidder.segment_quality(r);
        let cost = downloader.segment(r);
        nonnegative.lhs = gain;
        nonnegative.rhs = cost;
        if gain < cost {
            nonnegative.pass = false;
            nonnegative.violating_rate = Some(r);
            break;
        }
    }

    let top = bidder.ladder.highest();
    let lhs = 2.0 * segments as f64 * downloader.segment(top) + bidder.segment_degradation(top, 0.0);
    let nonincreasing = match tightest_buffer_gap(bidder, segments) {
        None => ConditionResult {
            pass: true,
            lhs,
            rhs: f64::INFINITY,
            violating_rate: None,
        },
        Some(gap) => ConditionResult {
            pass: lhs <= gap.abs(),
            lhs,
            rhs: gap.abs(),
            violating_rate: (lhs > gap.abs()).then_some(top),
        },
    };
    SufficientConditionReport {
        nonnegative,
        nonincreasing,
    }
}
