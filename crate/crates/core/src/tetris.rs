//! The Tetris process: an open system in which every non-empty bin loses one
//! ball per round and `⌊3n/4⌋` fresh balls arrive, each in a uniform bin.
//! Per-bin arrivals in distinct rounds are i.i.d. `Bin(⌊3n/4⌋, 1/n)`.

use std::collections::VecDeque;

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use crate::configuration::{Configuration, LoadStats};
use crate::error::{Error, Result};

/// Fresh arrivals per round for `n` bins.
pub fn arrivals_per_round(n: usize) -> usize {
    3 * n / 4
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TetrisState {
    loads: Vec<u32>,
    /// Last round `<= round` at which the bin was empty; 0 if never.
    last_empty: Vec<u64>,
    round: u64,
    arrivals: Vec<u32>,
}

impl TetrisState {
    pub fn new(loads: Vec<u32>) -> Result<Self> {
        let n = loads.len();
        if n < 4 {
            return Err(Error::TetrisTooSmall(n));
        }
        Ok(Self {
            loads,
            last_empty: vec![0; n],
            round: 0,
            arrivals: vec![0; n],
        })
    }

    pub fn from_configuration(q: &Configuration) -> Result<Self> {
        Self::new(q.loads().to_vec())
    }

    pub fn n(&self) -> usize {
        self.loads.len()
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn last_empty(&self) -> &[u64] {
        &self.last_empty
    }

    /// Per-bin arrivals of the most recent round (all zero before round 1).
    pub fn last_arrivals(&self) -> &[u32] {
        &self.arrivals
    }

    pub fn max_load(&self) -> u32 {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    pub fn stats(&self) -> LoadStats {
        LoadStats::of(&self.loads)
    }

    pub fn total(&self) -> u64 {
        self.loads.iter().map(|&l| l as u64).sum()
    }

    /// One round with uniform arrivals drawn from `rng`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.n();
        let dist = Uniform::new(0, n).expect("n >= 4");
        self.depart();
        for _ in 0..arrivals_per_round(n) {
            self.arrivals[dist.sample(rng)] += 1;
        }
        self.finish();
    }

    /// One round with the given arrival bins; there must be exactly
    /// `⌊3n/4⌋` of them.
    pub fn step_with_arrivals(&mut self, bins: &[usize]) -> Result<()> {
        let n = self.n();
        if bins.len() != arrivals_per_round(n) {
            return Err(Error::Precondition(format!(
                "expected {} arrivals, got {}",
                arrivals_per_round(n),
                bins.len()
            )));
        }
        if let Some(&b) = bins.iter().find(|&&b| b >= n) {
            return Err(Error::Precondition(format!("arrival bin {b} out of range")));
        }
        self.depart();
        for &b in bins {
            self.arrivals[b] += 1;
        }
        self.finish();
        Ok(())
    }

    /// Departure half of a round. Arrivals are then added to
    /// `arrivals_mut()` and the round closed with `finish`.
    pub(crate) fn depart(&mut self) {
        for (l, a) in self.loads.iter_mut().zip(self.arrivals.iter_mut()) {
            *l = l.saturating_sub(1);
            *a = 0;
        }
    }

    pub(crate) fn arrivals_mut(&mut self) -> &mut [u32] {
        &mut self.arrivals
    }

    pub(crate) fn finish(&mut self) {
        self.round += 1;
        for ((l, &a), le) in self.loads.iter_mut().zip(&self.arrivals).zip(&mut self.last_empty) {
            *l += a;
            if *l == 0 {
                *le = self.round;
            }
        }
    }
}

/// Functional form of [`TetrisState::step`].
pub fn tetris_step<R: Rng + ?Sized>(s: &TetrisState, rng: &mut R) -> TetrisState {
    let mut next = s.clone();
    next.step(rng);
    next
}

/// Per-round, per-bin arrival counts over the last `capacity` rounds.
#[derive(Debug, Clone)]
pub struct ArrivalCounter {
    n: usize,
    capacity: usize,
    rounds: VecDeque<(u64, Vec<u32>)>,
}

impl ArrivalCounter {
    pub fn new(n: usize, capacity: usize) -> Self {
        Self {
            n,
            capacity: capacity.max(1),
            rounds: VecDeque::new(),
        }
    }

    /// Records the arrivals of the round just completed by `s`.
    pub fn record(&mut self, s: &TetrisState) {
        self.push(s.round(), s.last_arrivals());
    }

    pub fn push(&mut self, round: u64, arrivals: &[u32]) {
        debug_assert_eq!(arrivals.len(), self.n);
        if self.rounds.len() == self.capacity {
            let (_, mut buf) = self.rounds.pop_front().expect("capacity >= 1");
            buf.copy_from_slice(arrivals);
            self.rounds.push_back((round, buf));
        } else {
            self.rounds.push_back((round, arrivals.to_vec()));
        }
    }

    pub fn first_round(&self) -> Option<u64> {
        self.rounds.front().map(|r| r.0)
    }

    pub fn last_round(&self) -> Option<u64> {
        self.rounds.back().map(|r| r.0)
    }

    /// Arrivals into `bin` over rounds `from..=to`.
    pub fn arrivals_in_window(&self, bin: usize, from: u64, to: u64) -> Result<u64> {
        let (first, last) = match (self.first_round(), self.last_round()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::EmptyHistory),
        };
        if from > to || from < first || to > last || bin >= self.n {
            return Err(Error::WindowOutOfRange { from, to, first, last });
        }
        let start = (from - first) as usize;
        let len = (to - from + 1) as usize;
        Ok(self
            .rounds
            .iter()
            .skip(start)
            .take(len)
            .map(|(_, a)| a[bin] as u64)
            .sum())
    }
}

/// First round `t <= horizon` at which each bin has load 0; bins empty at
/// the start report 0.
pub fn first_empty_times<R: Rng + ?Sized>(s0: &TetrisState, horizon: u64, rng: &mut R) -> Vec<Option<u64>> {
    let mut s = s0.clone();
    let mut first: Vec<Option<u64>> = s.loads().iter().map(|&l| (l == 0).then_some(0)).collect();
    let mut pending = first.iter().filter(|f| f.is_none()).count();
    while pending > 0 && s.round() < horizon {
        s.step(rng);
        for (f, &l) in first.iter_mut().zip(s.loads()) {
            if f.is_none() && l == 0 {
                *f = Some(s.round());
                pending -= 1;
            }
        }
    }
    first
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn forced_round() {
        let mut s = TetrisState::new(vec![1, 0, 2, 0]).unwrap();
        s.step_with_arrivals(&[0, 0, 1]).unwrap();
        assert_eq!(s.loads(), &[2, 1, 1, 0]);
        assert_eq!(s.last_empty(), &[0, 0, 0, 1]);
        assert_eq!(s.round(), 1);
        assert!(s.step_with_arrivals(&[0, 0]).is_err());
        assert!(s.step_with_arrivals(&[0, 0, 4]).is_err());
    }

    #[test]
    fn rejects_small_n() {
        assert_eq!(TetrisState::new(vec![0, 0, 0]), Err(Error::TetrisTooSmall(3)));
    }

    #[test]
    fn arrivals_total_each_round() {
        let mut r = stream(1, 0, Purpose::Tetris);
        for n in [4, 5, 7, 64, 101] {
            let mut s = TetrisState::new(vec![0; n]).unwrap();
            for _ in 0..50 {
                let before = s.clone();
                s.step(&mut r);
                let total: u32 = s.last_arrivals().iter().sum();
                assert_eq!(total as usize, 3 * n / 4);
                for u in 0..n {
                    assert_eq!(s.loads()[u], before.loads()[u].saturating_sub(1) + s.last_arrivals()[u]);
                }
            }
        }
    }

    #[test]
    fn empty_bin_loses_nothing() {
        let mut s = TetrisState::new(vec![0, 3, 0, 0]).unwrap();
        s.step_with_arrivals(&[1, 1, 1]).unwrap();
        assert_eq!(s.loads(), &[0, 5, 0, 0]);
    }

    #[test]
    fn window_queries() {
        let c = ArrivalCounter::new(4, 8);
        assert_eq!(c.arrivals_in_window(0, 1, 1), Err(Error::EmptyHistory));
        let mut c = ArrivalCounter::new(4, 3);
        c.push(1, &[1, 0, 2, 0]);
        c.push(2, &[0, 3, 0, 0]);
        c.push(3, &[2, 0, 0, 1]);
        assert_eq!(c.arrivals_in_window(0, 1, 3), Ok(3));
        assert_eq!(c.arrivals_in_window(1, 2, 2), Ok(3));
        c.push(4, &[1, 1, 1, 0]);
        assert!(matches!(c.arrivals_in_window(0, 1, 4), Err(Error::WindowOutOfRange { .. })));
        assert_eq!(c.arrivals_in_window(0, 2, 4), Ok(3));
        assert!(c.arrivals_in_window(0, 4, 3).is_err());
    }

    #[test]
    fn first_empty_all_zero_start() {
        let s = TetrisState::new(vec![0; 8]).unwrap();
        let f = first_empty_times(&s, 10, &mut stream(0, 0, Purpose::Tetris));
        assert!(f.iter().all(|&t| t == Some(0)));
    }

    #[test]
    fn first_empty_respects_drain_rate() {
        let mut loads = vec![0; 16];
        loads[3] = 40;
        loads[7] = 5;
        let s = TetrisState::new(loads.clone()).unwrap();
        let f = first_empty_times(&s, 500, &mut stream(2, 0, Purpose::Tetris));
        for (u, t) in f.iter().enumerate() {
            let t = t.expect("empties well within 500 rounds");
            assert!(t >= loads[u] as u64);
        }
    }

    #[test]
    fn first_empty_reports_never() {
        let s = TetrisState::new(vec![50, 0, 0, 0]).unwrap();
        let f = first_empty_times(&s, 10, &mut stream(2, 0, Purpose::Tetris));
        assert_eq!(f[0], None);
    }
}
