use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::error::{Error, Result};

pub type BallId = u32;

/// Queueing discipline used to pick the ball a non-empty bin ejects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Fifo,
    Lifo,
    Random,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(Strategy::Fifo),
            "lifo" => Ok(Strategy::Lifo),
            "random" => Ok(Strategy::Random),
            other => Err(Error::InvalidSpec(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Fifo => "fifo",
            Strategy::Lifo => "lifo",
            Strategy::Random => "random",
        })
    }
}

/// Removes and returns one ball from `queue`. The front of the queue is the
/// oldest arrival.
pub fn select_ball<R: Rng + ?Sized>(
    queue: &mut VecDeque<BallId>,
    strategy: Strategy,
    rng: &mut R,
) -> Result<BallId> {
    let picked = match strategy {
        Strategy::Fifo => queue.pop_front(),
        Strategy::Lifo => queue.pop_back(),
        Strategy::Random => {
            if queue.is_empty() {
                None
            } else {
                let i = rng.random_range(0..queue.len());
                queue.remove(i)
            }
        }
    };
    picked.ok_or(Error::EmptyQueue)
}

#[derive(Debug, Clone)]
struct Visits {
    words: usize,
    bits: Vec<u64>,
    count: Vec<u32>,
    covered_at: Vec<Option<u64>>,
    covered: usize,
}

impl Visits {
    fn new(balls: usize, n: usize) -> Self {
        let words = n.div_ceil(64);
        Self {
            words,
            bits: vec![0; words * balls],
            count: vec![0; balls],
            covered_at: vec![None; balls],
            covered: 0,
        }
    }

    #[inline]
    fn mark(&mut self, ball: usize, bin: usize, round: u64, n: usize) {
        let w = &mut self.bits[ball * self.words + bin / 64];
        let mask = 1u64 << (bin % 64);
        if *w & mask == 0 {
            *w |= mask;
            self.count[ball] += 1;
            if self.count[ball] as usize == n {
                self.covered_at[ball] = Some(round);
                self.covered += 1;
            }
        }
    }

    fn contains(&self, ball: usize, bin: usize) -> bool {
        self.bits[ball * self.words + bin / 64] & (1u64 << (bin % 64)) != 0
    }
}

/// Identity-level view of the process: per-bin queues of ball ids and
/// per-ball position, progress, visited bins and waiting bookkeeping.
///
/// Balls are numbered `0..m` in ascending bin order of the initial
/// configuration. A ball enqueued at round `r` into a bin holding `L` balls
/// after that round's arrivals sits at position `<= L`; under FIFO it is
/// therefore selected within `L` rounds. Every completed wait is checked
/// against that load.
#[derive(Debug, Clone)]
pub struct BallLedger {
    n: usize,
    round: u64,
    queues: Vec<VecDeque<BallId>>,
    position: Vec<u32>,
    progress: Vec<u64>,
    enqueue_round: Vec<u64>,
    enqueue_load: Vec<u32>,
    visits: Option<Visits>,
    max_wait: u64,
    waits_observed: u64,
    fifo_violations: u64,
}

impl BallLedger {
    pub fn new(q: &Configuration, track_visits: bool) -> Self {
        let n = q.n();
        let m = q.balls() as usize;
        let mut queues = vec![VecDeque::new(); n];
        let mut position = Vec::with_capacity(m);
        let mut enqueue_load = Vec::with_capacity(m);
        let mut id: BallId = 0;
        for (bin, &load) in q.loads().iter().enumerate() {
            for _ in 0..load {
                queues[bin].push_back(id);
                position.push(bin as u32);
                enqueue_load.push(load);
                id += 1;
            }
        }
        let mut visits = track_visits.then(|| Visits::new(m, n));
        if let Some(v) = visits.as_mut() {
            for (ball, &bin) in position.iter().enumerate() {
                v.mark(ball, bin as usize, 0, n);
            }
        }
        Self {
            n,
            round: 0,
            queues,
            position,
            progress: vec![0; m],
            enqueue_round: vec![0; m],
            enqueue_load,
            visits,
            max_wait: 0,
            waits_observed: 0,
            fifo_violations: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn balls(&self) -> usize {
        self.position.len()
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn queue(&self, bin: usize) -> &VecDeque<BallId> {
        &self.queues[bin]
    }

    pub fn position(&self, ball: BallId) -> usize {
        self.position[ball as usize] as usize
    }

    /// Number of rounds in which `ball` was the one selected from its queue,
    /// up to the ledger's current round.
    pub fn progress(&self, ball: BallId) -> u64 {
        self.progress[ball as usize]
    }

    pub fn min_progress(&self) -> u64 {
        self.progress.iter().copied().min().unwrap_or(0)
    }

    /// Longest completed residence (rounds from enqueue to selection) of any
    /// ball in a single queue.
    pub fn waiting_time_max(&self) -> u64 {
        self.max_wait
    }

    pub fn waits_observed(&self) -> u64 {
        self.waits_observed
    }

    /// FIFO selections whose residence exceeded the bin load at enqueue time.
    pub fn fifo_violations(&self) -> u64 {
        self.fifo_violations
    }

    pub fn tracks_visits(&self) -> bool {
        self.visits.is_some()
    }

    pub fn has_visited(&self, ball: BallId, bin: usize) -> Option<bool> {
        self.visits.as_ref().map(|v| v.contains(ball as usize, bin))
    }

    pub fn visited_count(&self, ball: BallId) -> Option<u32> {
        self.visits.as_ref().map(|v| v.count[ball as usize])
    }

    /// Round at which each ball had visited every bin, if it has.
    pub fn cover_rounds(&self) -> Option<&[Option<u64>]> {
        self.visits.as_ref().map(|v| v.covered_at.as_slice())
    }

    /// Round by which every ball covered every bin.
    pub fn parallel_cover_round(&self) -> Option<u64> {
        let rounds = self.cover_rounds()?;
        rounds.iter().try_fold(0u64, |acc, r| r.map(|r| acc.max(r)))
    }

    pub fn all_covered(&self) -> bool {
        self.visits.as_ref().is_some_and(|v| v.covered == v.count.len())
    }

    /// Pops the ball `bin` ejects during the transition to the next round.
    pub fn select<R: Rng + ?Sized>(&mut self, bin: usize, strategy: Strategy, rng: &mut R) -> Result<BallId> {
        let ball = select_ball(&mut self.queues[bin], strategy, rng)?;
        let b = ball as usize;
        let wait = self.round + 1 - self.enqueue_round[b];
        self.max_wait = self.max_wait.max(wait);
        self.waits_observed += 1;
        if strategy == Strategy::Fifo && wait > self.enqueue_load[b] as u64 {
            self.fifo_violations += 1;
        }
        self.progress[b] += 1;
        Ok(ball)
    }

    /// Delivers the balls selected this round, in the given order, and
    /// advances the round counter. `loads_after` is the configuration after
    /// all arrivals.
    pub fn deliver(&mut self, moves: &[(BallId, u32)], loads_after: &[u32]) {
        self.round += 1;
        for &(ball, dst) in moves {
            let b = ball as usize;
            let d = dst as usize;
            self.queues[d].push_back(ball);
            self.position[b] = dst;
            self.enqueue_round[b] = self.round;
            self.enqueue_load[b] = loads_after[d];
            if let Some(v) = self.visits.as_mut() {
                v.mark(b, d, self.round, self.n);
            }
        }
    }

    /// Moves balls so that queue lengths match `target`. With `follow` set,
    /// ball `b` in bin `u` goes to bin `follow[u]`; otherwise balls are dealt
    /// in identity order into bins in ascending order. Every queue ends up
    /// sorted by ball identity.
    pub fn reposition(&mut self, target: &Configuration, follow: Option<&[usize]>) -> Result<()> {
        if target.n() != self.n {
            return Err(Error::SizeMismatch(target.n(), self.n));
        }
        if target.balls() != self.balls() as u64 {
            return Err(Error::FaultBallCount {
                expected: self.balls() as u64,
                found: target.balls(),
            });
        }
        let mut fresh: Vec<VecDeque<BallId>> = vec![VecDeque::new(); self.n];
        match follow {
            Some(map) => {
                for (u, q) in self.queues.iter().enumerate() {
                    fresh[map[u]].extend(q.iter().copied());
                }
                for q in fresh.iter_mut() {
                    q.make_contiguous().sort_unstable();
                }
                if fresh.iter().zip(target.loads()).any(|(q, &l)| q.len() != l as usize) {
                    return Err(Error::Precondition("bin map disagrees with target loads".into()));
                }
            }
            None => {
                let mut ball: BallId = 0;
                for (bin, &load) in target.loads().iter().enumerate() {
                    for _ in 0..load {
                        fresh[bin].push_back(ball);
                        ball += 1;
                    }
                }
            }
        }
        self.queues = fresh;
        for (bin, q) in self.queues.iter().enumerate() {
            for &ball in q {
                let b = ball as usize;
                self.position[b] = bin as u32;
                self.enqueue_round[b] = self.round;
                self.enqueue_load[b] = q.len() as u32;
                if let Some(v) = self.visits.as_mut() {
                    v.mark(b, bin, self.round, self.n);
                }
            }
        }
        Ok(())
    }

    pub fn loads(&self) -> Vec<u32> {
        self.queues.iter().map(|q| q.len() as u32).collect()
    }

    /// Queue lengths equal `loads`, positions agree with queue membership,
    /// and each ball has visited its current bin.
    pub fn is_consistent_with(&self, loads: &[u32]) -> bool {
        if loads.len() != self.n {
            return false;
        }
        let mut seen = vec![false; self.balls()];
        for (bin, q) in self.queues.iter().enumerate() {
            if q.len() != loads[bin] as usize {
                return false;
            }
            for &ball in q {
                let b = ball as usize;
                if b >= seen.len() || seen[b] || self.position[b] as usize != bin {
                    return false;
                }
                seen[b] = true;
                if let Some(v) = &self.visits {
                    if !v.contains(b, bin) {
                        return false;
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
