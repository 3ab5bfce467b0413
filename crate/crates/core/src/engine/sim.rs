use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use crate::engine::{
    degradation_volume, download_duration, rebuffer_ratio, vickrey_winner, AuctionRecord, AwardRecord,
    Mechanism, PriceBid, SimConfig, SimEvent, SimEventKind, SimResult, UserResult,
};
use crate::error::SimError;
use crate::io::trace::{CapacitySeries, CapacityTrace, EncounterTrace};
use crate::model::{utility_total, CapacityWindow, CostModel, UserId, UserProfile, UserState};
use crate::momd::{resolve_vickrey_score, BitrateMatrix, MomdBid};
use crate::somd::{optimal_somd_bid, resolve_second_score, ScoreFunction, SomdBid};
use crate::strategy::{
    baseline_bitrate, optimal_bitrate_matrix, should_participate, truthful_price_vector, PolicyKind,
};

/// Capacity estimates are floored here so the airtime cost stays finite.
const MIN_CAPACITY_ESTIMATE: f64 = 1e-3;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ev {
    LinkFree(usize),
    Resolve(usize),
    DownloadDone(usize),
    Deliver(Job),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Job {
    downloader: usize,
    receiver: usize,
    seq: usize,
    rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Queued {
    time: f64,
    seq: u64,
    ev: Ev,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Link {
    Idle,
    Auctioning,
    Busy { job: Job, start: f64 },
    Stopped,
}

struct Peer<'a> {
    profile: &'a UserProfile,
    watching: bool,
    helper: bool,
    capacity: &'a CapacitySeries,
    beta: f64,
    max_buffer: f64,
    total: usize,
    assigned: usize,
    delivered: Vec<Option<f64>>,
    contig: usize,
    last_assigned: f64,
    started: bool,
    play_pos: f64,
    stalled_since: Option<f64>,
    finished_at: Option<f64>,
    stall_s: f64,
    stall_events: usize,
    history: CapacityWindow,
    queue: VecDeque<Job>,
    link: Link,
    utility: f64,
    cost: f64,
    paid: f64,
    received: f64,
    overhead: f64,
    downloads: usize,
    buf_min: f64,
    buf_max: f64,
}

impl Peer<'_> {
    fn name(&self) -> &str {
        &self.profile.name
    }

    fn buffer(&self) -> f64 {
        self.contig as f64 * self.beta - self.play_pos
    }

    fn remaining(&self) -> usize {
        self.total - self.assigned
    }

    /// Whole segments that can still be requested without the buffer ever
    /// exceeding its maximum.
    fn headroom(&self) -> usize {
        let occupied = self.assigned as f64 * self.beta - self.play_pos;
        let free = (self.max_buffer - occupied) / self.beta + EPS;
        if free <= 0.0 {
            0
        } else {
            (free.floor() as usize).min(self.remaining())
        }
    }

    fn done(&self) -> bool {
        !self.watching || self.finished_at.is_some()
    }

    fn state(&self) -> UserState {
        UserState {
            buffer_s: (self.assigned as f64 * self.beta - self.play_pos).clamp(0.0, self.max_buffer),
            prev_bitrate: self.last_assigned,
            capacity_history: self.history.clone(),
        }
    }

    fn estimate(&self, t: f64) -> f64 {
        self.history
            .mean()
            .unwrap_or_else(|| self.capacity.value_at(t))
            .max(MIN_CAPACITY_ESTIMATE)
    }

    fn observe_buffer(&mut self) {
        let b = self.buffer();
        self.buf_min = self.buf_min.min(b);
        self.buf_max = self.buf_max.max(b);
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    encounters: &'a EncounterTrace,
    peers: Vec<Peer<'a>>,
    heap: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
    now: f64,
    events: Vec<SimEvent>,
    auctions: Vec<AuctionRecord>,
    auction_count: usize,
    violations: usize,
}

/// Run one simulation. Traces are keyed by user name; every user needs a
/// capacity series, and pairs absent from the encounter trace never meet.
pub fn run_simulation(
    cfg: &SimConfig,
    capacity: &CapacityTrace,
    encounters: &EncounterTrace,
) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let mut peers = Vec::with_capacity(cfg.users.len());
    for u in &cfg.users {
        let series = capacity.get(&u.profile.name).ok_or_else(|| SimError::TraceUnderrun {
            user: u.profile.name.clone(),
            time_s: 0.0,
        })?;
        let beta = u.profile.segment_length_s();
        let total = if u.watching {
            (cfg.video_length_s / beta).round() as usize
        } else {
            0
        };
        peers.push(Peer {
            profile: &u.profile,
            watching: u.watching,
            helper: u.helper || !u.watching,
            capacity: series,
            beta,
            max_buffer: u.profile.ladder.max_buffer_s(),
            total,
            assigned: 0,
            delivered: vec![None; total],
            contig: 0,
            last_assigned: 0.0,
            started: false,
            play_pos: 0.0,
            stalled_since: None,
            finished_at: None,
            stall_s: 0.0,
            stall_events: 0,
            history: CapacityWindow::default(),
            queue: VecDeque::new(),
            link: Link::Idle,
            utility: 0.0,
            cost: 0.0,
            paid: 0.0,
            received: 0.0,
            overhead: 0.0,
            downloads: 0,
            buf_min: 0.0,
            buf_max: 0.0,
        });
    }
    let mut sim = Sim {
        cfg,
        encounters,
        peers,
        heap: BinaryHeap::new(),
        next_seq: 0,
        now: 0.0,
        events: Vec::new(),
        auctions: Vec::new(),
        auction_count: 0,
        violations: 0,
    };
    for n in 0..sim.peers.len() {
        sim.push(0.0, Ev::LinkFree(n));
    }
    sim.run()?;
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn push(&mut self, time: f64, ev: Ev) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Queued { time, seq, ev }));
    }

    fn log(&mut self, time_s: f64, kind: SimEventKind) {
        if self.cfg.record_events {
            let seq = self.events.len() as u64;
            self.events.push(SimEvent { time_s, seq, kind });
        }
    }

    fn all_done(&self) -> bool {
        self.peers.iter().all(Peer::done)
    }

    fn run(&mut self) -> Result<(), SimError> {
        while !self.all_done() {
            let Some(Reverse(q)) = self.heap.pop() else {
                break;
            };
            if q.time > self.cfg.max_time_s {
                return Err(SimError::Horizon { time_s: self.cfg.max_time_s });
            }
            self.advance(q.time);
            match q.ev {
                Ev::LinkFree(n) => self.on_link_free(n)?,
                Ev::Resolve(n) => self.on_resolve(n)?,
                Ev::DownloadDone(n) => self.on_download_done(n)?,
                Ev::Deliver(job) => self.deliver(job),
            }
        }
        Ok(())
    }

    /// Play every user's video forward to `t`.
    fn advance(&mut self, t: f64) {
        let from = self.now;
        for i in 0..self.peers.len() {
            let p = &mut self.peers[i];
            if !p.started || p.finished_at.is_some() || p.stalled_since.is_some() {
                continue;
            }
            let end = p.contig as f64 * p.beta;
            if p.play_pos + (t - from) <= end && !(p.contig == p.total && p.play_pos + (t - from) == end) {
                p.play_pos += t - from;
                continue;
            }
            let at = from + (end - p.play_pos);
            p.play_pos = end;
            let user = p.name().to_string();
            if p.contig == p.total {
                p.finished_at = Some(at);
                self.log(at, SimEventKind::VideoComplete { user });
            } else {
                p.stalled_since = Some(at);
                p.stall_events += 1;
                self.log(at, SimEventKind::PlaybackStallStart { user });
            }
        }
        self.now = t;
        for p in &mut self.peers {
            if p.watching {
                p.observe_buffer();
            }
        }
    }

    /// Earliest time a blocked link should look again.
    fn retry_time(&self) -> f64 {
        let mut wait = self.cfg.idle_retry_s;
        for p in &self.peers {
            if !p.watching || p.remaining() == 0 || p.headroom() > 0 {
                continue;
            }
            if p.started && p.stalled_since.is_none() && p.finished_at.is_none() {
                let occupied = p.assigned as f64 * p.beta - p.play_pos;
                let need = occupied + p.beta - p.max_buffer;
                if need > 0.0 && need <= p.buffer() {
                    wait = wait.min(need);
                }
            }
        }
        self.now + wait.max(EPS)
    }

    fn link_has_work(&self, n: usize) -> bool {
        let p = &self.peers[n];
        match self.cfg.mechanism {
            Mechanism::Noncooperative => p.watching && p.remaining() > 0,
            _ => {
                let others_need = self.peers.iter().any(|q| q.watching && q.remaining() > 0);
                others_need && (p.remaining() > 0 || p.helper)
            }
        }
    }

    fn on_link_free(&mut self, n: usize) -> Result<(), SimError> {
        if self.peers[n].link != Link::Idle {
            return Ok(());
        }
        if !self.link_has_work(n) {
            self.peers[n].link = Link::Stopped;
            return Ok(());
        }
        if self.cfg.mechanism == Mechanism::Noncooperative {
            return self.self_download(n);
        }
        let bidders = self.eligible_bidders(n);
        if bidders.is_empty() {
            let t = self.retry_time();
            self.push(t, Ev::LinkFree(n));
            return Ok(());
        }
        self.auction_count += 1;
        self.peers[n].overhead += self.cfg.overhead_energy_per_auction;
        self.peers[n].link = Link::Auctioning;
        let names = bidders.iter().map(|b| self.peers[*b].name().to_string()).collect();
        let auctioneer = self.peers[n].name().to_string();
        self.log(self.now, SimEventKind::AuctionStart { auctioneer, bidders: names });
        let t = self.now + self.cfg.overhead_time_per_auction_s;
        self.push(t, Ev::Resolve(n));
        Ok(())
    }

    fn connected(&self, a: usize, b: usize) -> bool {
        self.encounters
            .connected(self.peers[a].name(), self.peers[b].name(), self.now)
    }

    fn eligible_bidders(&self, n: usize) -> Vec<usize> {
        let est_n = self.peers[n].estimate(self.now);
        (0..self.peers.len())
            .filter(|&m| {
                let p = &self.peers[m];
                p.watching && p.remaining() > 0 && p.headroom() > 0 && self.connected(n, m)
            })
            .filter(|&m| !self.cfg.participation_enabled || self.participates(m, est_n))
            .collect()
    }

    fn participates(&self, m: usize, auctioneer_capacity: f64) -> bool {
        // Links that have stopped offer nobody anything.
        let shares: Vec<f64> = (0..self.peers.len())
            .filter(|&i| self.connected(m, i) && self.peers[i].link != Link::Stopped)
            .map(|i| {
                let degree = (0..self.peers.len()).filter(|&j| self.connected(i, j)).count();
                self.peers[i].estimate(self.now) / degree as f64
            })
            .collect();
        let p = &self.peers[m];
        should_participate(p.profile, &p.state(), auctioneer_capacity, &shares, &self.cfg.participation)
    }

    fn cost_model(&self, n: usize) -> CostModel {
        let p = &self.peers[n];
        p.profile.estimated_cost_model(p.estimate(self.now))
    }

    /// Rate a receiver asks for when the bitrate is not part of the bid.
    fn policy_rate(&self, m: usize, sf: &ScoreFunction, auctioneer_capacity: f64) -> f64 {
        let p = &self.peers[m];
        let state = p.state();
        match self.cfg.adaptation.kind {
            PolicyKind::Optimal => optimal_somd_bid(p.profile, &state, sf).bitrate,
            _ => baseline_bitrate(&self.cfg.adaptation, &state, auctioneer_capacity, &p.profile.ladder),
        }
    }

    fn self_download(&mut self, n: usize) -> Result<(), SimError> {
        if self.peers[n].headroom() == 0 {
            let t = self.retry_time();
            self.push(t, Ev::LinkFree(n));
            return Ok(());
        }
        let sf = ScoreFunction::efficient(self.cost_model(n));
        let rate = self.policy_rate(n, &sf, self.peers[n].estimate(self.now));
        let state = self.peers[n].state();
        self.peers[n].utility += utility_total(self.peers[n].profile, &state, &[rate]);
        let job = self.assign(n, n, rate);
        self.peers[n].queue.push_back(job);
        self.start_next(n)
    }

    fn assign(&mut self, downloader: usize, receiver: usize, rate: f64) -> Job {
        let p = &mut self.peers[receiver];
        let seq = p.assigned;
        p.assigned += 1;
        p.last_assigned = rate;
        Job {
            downloader,
            receiver,
            seq,
            rate,
        }
    }

    fn on_resolve(&mut self, n: usize) -> Result<(), SimError> {
        self.peers[n].link = Link::Idle;
        let bidders = self.eligible_bidders(n);
        let auctioneer = self.peers[n].name().to_string();
        if bidders.is_empty() {
            self.log(self.now, SimEventKind::AuctionResolved { auctioneer, awards: Vec::new() });
            let t = self.retry_time();
            self.push(t, Ev::LinkFree(n));
            return Ok(());
        }
        let cost = self.cost_model(n);
        let sf = ScoreFunction::efficient(cost);
        // (receiver, bitrates, payment); download order follows the list.
        let (awards, order) = match self.cfg.mechanism {
            Mechanism::Momd => self.resolve_momd(n, &bidders, &sf, &cost)?,
            Mechanism::Somd => self.resolve_somd(n, &bidders, &sf)?,
            Mechanism::Vickrey1d => self.resolve_vickrey(n, &bidders, &sf),
            Mechanism::Noncooperative => unreachable!("no auctions without cooperation"),
        };

        let mut records = Vec::with_capacity(awards.len());
        let mut jobs: Vec<VecDeque<Job>> = Vec::with_capacity(awards.len());
        let mut received = 0.0;
        for (m, rates, payment) in &awards {
            let state = self.peers[*m].state();
            self.peers[*m].utility += utility_total(self.peers[*m].profile, &state, rates);
            self.peers[*m].paid += payment;
            self.peers[n].received += payment;
            received += payment;
            jobs.push(rates.iter().map(|r| self.assign(n, *m, *r)).collect());
            records.push(AwardRecord {
                receiver: self.peers[*m].name().to_string(),
                bitrates: rates.clone(),
                payment: *payment,
            });
        }
        for i in order {
            let job = jobs[i].pop_front().expect("one job per won segment");
            self.peers[n].queue.push_back(job);
        }
        self.log(
            self.now,
            SimEventKind::AuctionResolved {
                auctioneer: auctioneer.clone(),
                awards: records.clone(),
            },
        );
        self.auctions.push(AuctionRecord {
            time_s: self.now,
            auctioneer,
            awards: records,
            received,
        });
        self.start_next(n)
    }

    #[allow(clippy::type_complexity)]
    fn resolve_momd(
        &mut self,
        n: usize,
        bidders: &[usize],
        sf: &ScoreFunction,
        cost: &CostModel,
    ) -> Result<(Vec<(usize, Vec<f64>, f64)>, Vec<usize>), SimError> {
        let k = self.cfg.segments_per_auction;
        let est_n = self.peers[n].estimate(self.now);
        let mut bids = Vec::with_capacity(bidders.len());
        for &m in bidders {
            let p = &self.peers[m];
            let state = p.state();
            let rows = k.min(p.headroom());
            let matrix = match self.cfg.adaptation.kind {
                PolicyKind::Optimal => optimal_bitrate_matrix(p.profile, &state, cost, rows),
                _ => {
                    let r = baseline_bitrate(&self.cfg.adaptation, &state, est_n, &p.profile.ladder);
                    BitrateMatrix::from_row_rates(&vec![r; rows])
                }
            };
            let prices = truthful_price_vector(p.profile, &state, &matrix);
            bids.push(MomdBid::new(p.profile.id, matrix, prices)?);
        }
        let supply = bids.iter().map(MomdBid::segments).sum::<usize>().min(k);
        let outcome = resolve_vickrey_score(&bids, sf, supply)?;
        self.violations += outcome.assumption1_violations.len();

        let index_of = |id: UserId| bidders.iter().position(|&m| self.peers[m].profile.id == id).expect("bidder");
        let winners: Vec<usize> = outcome
            .awards
            .iter()
            .enumerate()
            .filter(|(_, a)| a.segments > 0)
            .map(|(i, _)| i)
            .collect();
        let awards = winners
            .iter()
            .map(|&i| {
                let a = &outcome.awards[i];
                (bidders[i], a.bitrates.clone(), a.payment)
            })
            .collect();
        let order = outcome
            .per_segment_winners
            .iter()
            .map(|id| {
                let bi = index_of(*id);
                winners.iter().position(|&w| w == bi).expect("winner")
            })
            .collect();
        Ok((awards, order))
    }

    #[allow(clippy::type_complexity)]
    fn resolve_somd(
        &mut self,
        n: usize,
        bidders: &[usize],
        sf: &ScoreFunction,
    ) -> Result<(Vec<(usize, Vec<f64>, f64)>, Vec<usize>), SimError> {
        let est_n = self.peers[n].estimate(self.now);
        let bids: Vec<SomdBid> = bidders
            .iter()
            .map(|&m| {
                let p = &self.peers[m];
                let state = p.state();
                match self.cfg.adaptation.kind {
                    PolicyKind::Optimal => optimal_somd_bid(p.profile, &state, sf),
                    _ => {
                        let r = baseline_bitrate(&self.cfg.adaptation, &state, est_n, &p.profile.ladder);
                        SomdBid {
                            bidder: p.profile.id,
                            bitrate: r,
                            price: utility_total(p.profile, &state, &[r]),
                        }
                    }
                }
            })
            .collect();
        let (winner, rate, payment) = if bids.len() >= 2 {
            let out = resolve_second_score(&bids, sf)?;
            let w = bidders.iter().position(|&m| self.peers[m].profile.id == out.winner).expect("winner");
            (w, out.winning_bitrate, out.payment)
        } else {
            // A lone bidder faces only the empty bid (score 0); buying from
            // oneself is free.
            let b = bids[0];
            let pay = if bidders[0] == n { 0.0 } else { sf.penalty(b.bitrate) };
            (0, b.bitrate, pay)
        };
        Ok((vec![(bidders[winner], vec![rate], payment)], vec![0]))
    }

    #[allow(clippy::type_complexity)]
    fn resolve_vickrey(
        &mut self,
        n: usize,
        bidders: &[usize],
        sf: &ScoreFunction,
    ) -> (Vec<(usize, Vec<f64>, f64)>, Vec<usize>) {
        let est_n = self.peers[n].estimate(self.now);
        let bids: Vec<PriceBid> = bidders
            .iter()
            .map(|&m| {
                let p = &self.peers[m];
                let state = p.state();
                let r = self.policy_rate(m, sf, est_n);
                PriceBid {
                    bidder: p.profile.id,
                    bitrate: r,
                    price: utility_total(p.profile, &state, &[r]),
                }
            })
            .collect();
        let w = vickrey_winner(&bids).expect("at least one bid");
        let second = bids
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != w)
            .map(|(_, b)| b.price)
            .fold(0.0f64, f64::max);
        (vec![(bidders[w], vec![bids[w].bitrate], second)], vec![0])
    }

    fn start_next(&mut self, n: usize) -> Result<(), SimError> {
        let Some(job) = self.peers[n].queue.pop_front() else {
            self.peers[n].link = Link::Idle;
            self.push(self.now, Ev::LinkFree(n));
            return Ok(());
        };
        let p = &self.peers[n];
        let beta = self.peers[job.receiver].beta;
        let dur = download_duration(p.capacity, self.now, job.rate, beta, p.name())?;
        self.peers[n].link = Link::Busy { job, start: self.now };
        self.push(self.now + dur, Ev::DownloadDone(n));
        Ok(())
    }

    fn on_download_done(&mut self, n: usize) -> Result<(), SimError> {
        let Link::Busy { job, start } = self.peers[n].link else {
            unreachable!("download completion on an idle link");
        };
        let dur = self.now - start;
        let beta = self.peers[job.receiver].beta;
        let volume = job.rate * beta;
        let p = &mut self.peers[n];
        p.cost += p.profile.cost_per_mbit * volume + p.profile.cost_per_download_s * dur;
        p.downloads += 1;
        if dur > 0.0 {
            p.history.record(volume / dur);
        }
        let kind = SimEventKind::SegmentDownloaded {
            downloader: p.name().to_string(),
            receiver: self.peers[job.receiver].name().to_string(),
            seq: job.seq,
            bitrate: job.rate,
            duration_s: dur,
        };
        self.log(self.now, kind);
        if self.cfg.d2d_delay_s > 0.0 && job.receiver != n {
            self.push(self.now + self.cfg.d2d_delay_s, Ev::Deliver(job));
        } else {
            self.deliver(job);
        }
        self.peers[n].link = Link::Idle;
        if self.peers[n].queue.is_empty() {
            self.on_link_free(n)
        } else {
            self.start_next(n)
        }
    }

    fn deliver(&mut self, job: Job) {
        let now = self.now;
        let p = &mut self.peers[job.receiver];
        debug_assert!(p.delivered[job.seq].is_none());
        p.delivered[job.seq] = Some(job.rate);
        while p.contig < p.total && p.delivered[p.contig].is_some() {
            p.contig += 1;
        }
        if !p.started && p.contig > 0 {
            p.started = true;
        }
        let mut stall_end = None;
        if let Some(since) = p.stalled_since {
            if p.contig as f64 * p.beta > p.play_pos {
                p.stall_s += now - since;
                p.stalled_since = None;
                stall_end = Some(now - since);
            }
        }
        p.observe_buffer();
        let user = p.name().to_string();
        let buffer_s = p.buffer();
        self.log(
            now,
            SimEventKind::SegmentDelivered {
                receiver: user.clone(),
                seq: job.seq,
                bitrate: job.rate,
                buffer_s,
            },
        );
        if let Some(stalled_s) = stall_end {
            self.log(now, SimEventKind::PlaybackStallEnd { user, stalled_s });
        }
    }

    fn finish(mut self) -> SimResult {
        // Drain playback of anyone still holding content.
        let horizon = self
            .peers
            .iter()
            .filter(|p| p.started && p.finished_at.is_none() && p.stalled_since.is_none())
            .map(|p| self.now + (p.contig as f64 * p.beta - p.play_pos))
            .fold(self.now, f64::max);
        if horizon > self.now {
            self.advance(horizon);
        }
        let cfg = self.cfg;
        let mut users = Vec::with_capacity(self.peers.len());
        for p in &self.peers {
            let bitrates: Vec<f64> = p.delivered.iter().map_while(|r| *r).collect();
            let bitrate_sum: f64 = bitrates.iter().sum();
            let penalty = cfg.rebuffer_penalty_per_s * p.stall_s;
            let utility = p.utility - penalty;
            users.push(UserResult {
                name: p.name().to_string(),
                watching: p.watching,
                segments: bitrates.len(),
                utility,
                rebuffer_penalty: penalty,
                cost: p.cost,
                payments_made: p.paid,
                payments_received: p.received,
                overhead_energy: p.overhead,
                welfare: utility - p.cost - p.paid + p.received - p.overhead,
                average_bitrate: if bitrates.is_empty() { 0.0 } else { bitrate_sum / bitrates.len() as f64 },
                bitrate_sum,
                rebuffer_s: p.stall_s,
                stall_events: p.stall_events,
                degradation_volume: degradation_volume(&bitrates),
                degradation_events: bitrates.windows(2).filter(|w| w[1] < w[0]).count(),
                buffer_min_s: p.buf_min,
                buffer_max_s: p.buf_max,
                completion_time_s: p.finished_at,
                downloads: p.downloads,
                bitrates,
            });
        }
        let total_utility: f64 = users.iter().map(|u| u.utility).sum();
        let total_cost: f64 = users.iter().map(|u| u.cost).sum();
        let total_overhead_energy = self.auction_count as f64 * cfg.overhead_energy_per_auction;
        let watching: Vec<&UserResult> = users.iter().filter(|u| u.watching).collect();
        let (rebuffer, drops, sum, segs) = watching.iter().fold((0.0, 0.0, 0.0, 0usize), |acc, u| {
            (
                acc.0 + rebuffer_ratio(u.rebuffer_s, cfg.video_length_s),
                acc.1 + u.degradation_volume,
                acc.2 + u.bitrate_sum,
                acc.3 + u.segments,
            )
        });
        let end_time_s = self
            .peers
            .iter()
            .filter_map(|p| p.finished_at)
            .fold(0.0, f64::max);
        SimResult {
            social_welfare: total_utility - total_cost - total_overhead_energy,
            total_utility,
            total_cost,
            total_overhead_energy,
            rebuffer_ratio: if watching.is_empty() { 0.0 } else { rebuffer / watching.len() as f64 },
            degradation_ratio: if sum > 0.0 { drops / sum } else { 0.0 },
            average_bitrate: if segs > 0 { sum / segs as f64 } else { 0.0 },
            auction_count: self.auction_count,
            assumption1_violations: self.violations,
            end_time_s,
            auctions: self.auctions,
            events: self.events,
            users,
        }
    }
}
