//! One round of repeated balls-into-bins: every non-empty bin ejects one ball,
//! which lands on a uniformly random neighbour of its bin.

use rand::Rng;
use serde::Serialize;

use crate::configuration::{Configuration, LoadStats};
use crate::error::{Error, Result};
use crate::ledger::{BallId, BallLedger, Strategy};
use crate::rng::{self, Purpose, StreamRng};
use crate::topology::Topology;

/// One destination per non-empty bin, keyed by source bin in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DestinationDraws {
    pairs: Vec<(u32, u32)>,
}

impl DestinationDraws {
    /// Draws one destination for every non-empty bin of `q`, in ascending
    /// bin order. The ball-selection strategy never touches this stream.
    pub fn draw<R: Rng + ?Sized>(q: &Configuration, topology: &Topology, rng: &mut R) -> Self {
        let pairs = q
            .nonempty_bins()
            .map(|u| (u as u32, topology.sample(u, rng) as u32))
            .collect();
        Self { pairs }
    }

    /// Forced draws, checked against the configuration and topology.
    pub fn from_pairs(q: &Configuration, topology: &Topology, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        let sources: Vec<usize> = sorted.iter().map(|p| p.0).collect();
        let expected: Vec<usize> = q.nonempty_bins().collect();
        if sources != expected {
            return Err(Error::DrawMismatch(format!(
                "sources {sources:?} differ from non-empty bins {expected:?}"
            )));
        }
        if let Some(&(u, v)) = sorted.iter().find(|(u, v)| !topology.is_neighbour(*u, *v)) {
            return Err(Error::DrawMismatch(format!("{v} is not a neighbour of {u}")));
        }
        Ok(Self {
            pairs: sorted.into_iter().map(|(u, v)| (u as u32, v as u32)).collect(),
        })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(u, v)| (u as usize, v as usize))
    }

    pub fn destination(&self, source: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&(source as u32), |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1 as usize)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `q'_v = (q_v ∸ 1) + |{u : d(u) = v}|`.
pub fn step(q: &Configuration, d: &DestinationDraws) -> Configuration {
    let mut loads: Vec<u32> = q.loads().iter().map(|&l| l.saturating_sub(1)).collect();
    for (_, v) in d.pairs() {
        loads[v] += 1;
    }
    Configuration::from_parts_unchecked(loads, q.balls())
}

/// Per-round summary recorded in a [`Trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub max_load: u32,
    pub empty: usize,
    pub overloaded: usize,
}

impl RoundRecord {
    pub fn new(round: u64, s: LoadStats) -> Self {
        Self {
            round,
            max_load: s.max_load,
            empty: s.empty,
            overloaded: s.overloaded,
        }
    }
}

/// Round-by-round summaries, starting with round 0 (the initial state).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub records: Vec<RoundRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_load(&self) -> u32 {
        self.records.iter().map(|r| r.max_load).max().unwrap_or(0)
    }
}

/// Whether to carry ball identities along with the loads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tracking {
    LoadsOnly,
    Balls,
    BallsAndVisits,
}

/// Buffered simulator for one trial. Destinations come from the trial's
/// `Destinations` stream and random selections from its `Selection` stream,
/// so loads are identical across strategies for a fixed seed.
#[derive(Debug, Clone)]
pub struct Process {
    topology: Topology,
    strategy: Strategy,
    loads: Vec<u32>,
    arrivals: Vec<u32>,
    balls: u64,
    round: u64,
    stats: LoadStats,
    destinations: StreamRng,
    selection: StreamRng,
    ledger: Option<BallLedger>,
    moves: Vec<(BallId, u32)>,
}

impl Process {
    pub fn new(
        q0: &Configuration,
        topology: Topology,
        strategy: Strategy,
        tracking: Tracking,
        seed: u64,
        trial: u64,
    ) -> Result<Self> {
        Self::with_streams(
            q0,
            topology,
            strategy,
            tracking,
            rng::stream(seed, trial, Purpose::Destinations),
            rng::stream(seed, trial, Purpose::Selection),
        )
    }

    pub fn with_streams(
        q0: &Configuration,
        topology: Topology,
        strategy: Strategy,
        tracking: Tracking,
        destinations: StreamRng,
        selection: StreamRng,
    ) -> Result<Self> {
        if topology.n() != q0.n() {
            return Err(Error::SizeMismatch(topology.n(), q0.n()));
        }
        let ledger = match tracking {
            Tracking::LoadsOnly => None,
            Tracking::Balls => Some(BallLedger::new(q0, false)),
            Tracking::BallsAndVisits => Some(BallLedger::new(q0, true)),
        };
        Ok(Self {
            topology,
            strategy,
            loads: q0.loads().to_vec(),
            arrivals: vec![0; q0.n()],
            balls: q0.balls(),
            round: 0,
            stats: q0.stats(),
            destinations,
            selection,
            ledger,
            moves: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.loads.len()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    pub fn stats(&self) -> LoadStats {
        self.stats
    }

    pub fn balls(&self) -> u64 {
        self.balls
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::from_parts_unchecked(self.loads.clone(), self.balls)
    }

    pub fn ledger(&self) -> Option<&BallLedger> {
        self.ledger.as_ref()
    }

    pub fn into_ledger(self) -> Option<BallLedger> {
        self.ledger
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Advances one round and returns the new summary.
    pub fn step(&mut self) -> LoadStats {
        let n = self.loads.len();
        match self.ledger.as_mut() {
            None => {
                for u in 0..n {
                    if self.loads[u] > 0 {
                        self.loads[u] -= 1;
                        let v = self.topology.sample(u, &mut self.destinations);
                        self.arrivals[v] += 1;
                    }
                }
            }
            Some(ledger) => {
                self.moves.clear();
                for u in 0..n {
                    if self.loads[u] > 0 {
                        self.loads[u] -= 1;
                        let v = self.topology.sample(u, &mut self.destinations);
                        self.arrivals[v] += 1;
                        let ball = ledger
                            .select(u, self.strategy, &mut self.selection)
                            .expect("ledger queue out of sync with loads");
                        self.moves.push((ball, v as u32));
                    }
                }
            }
        }
        let mut s = LoadStats::default();
        for (l, a) in self.loads.iter_mut().zip(self.arrivals.iter_mut()) {
            *l += *a;
            *a = 0;
            match *l {
                0 => s.empty += 1,
                1 => s.singleton += 1,
                _ => s.overloaded += 1,
            }
            s.max_load = s.max_load.max(*l);
        }
        if let Some(ledger) = self.ledger.as_mut() {
            ledger.deliver(&self.moves, &self.loads);
        }
        self.round += 1;
        self.stats = s;
        debug_assert!(s.overload_bound_holds(n, self.balls));
        s
    }

    /// Replaces the configuration in place (an adversarial fault). The ledger,
    /// if any, is repositioned as described in [`BallLedger::reposition`].
    pub fn replace_configuration(&mut self, q: &Configuration, follow: Option<&[usize]>) -> Result<()> {
        if q.n() != self.n() {
            return Err(Error::SizeMismatch(q.n(), self.n()));
        }
        if q.balls() != self.balls {
            return Err(Error::FaultBallCount {
                expected: self.balls,
                found: q.balls(),
            });
        }
        if let Some(ledger) = self.ledger.as_mut() {
            ledger.reposition(q, follow)?;
        }
        self.loads.copy_from_slice(q.loads());
        self.stats = q.stats();
        Ok(())
    }
}

/// Runs `rounds` rounds from `q0` on trial 0 of `seed`, recording every round.
pub fn run(
    q0: &Configuration,
    strategy: Strategy,
    topology: &Topology,
    rounds: u64,
    seed: u64,
) -> Result<(Trajectory, BallLedger)> {
    run_trial(q0, strategy, topology, rounds, seed, 0)
}

pub fn run_trial(
    q0: &Configuration,
    strategy: Strategy,
    topology: &Topology,
    rounds: u64,
    seed: u64,
    trial: u64,
) -> Result<(Trajectory, BallLedger)> {
    let mut p = Process::new(q0, topology.clone(), strategy, Tracking::BallsAndVisits, seed, trial)?;
    let mut records = Vec::with_capacity(rounds as usize + 1);
    records.push(RoundRecord::new(0, p.stats()));
    for _ in 0..rounds {
        let s = p.step();
        records.push(RoundRecord::new(p.round(), s));
    }
    let ledger = p.into_ledger().expect("ledger requested");
    Ok((Trajectory { records }, ledger))
}
