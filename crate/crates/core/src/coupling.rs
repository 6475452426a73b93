//! The original process and the Tetris process driven by one random stream.
//!
//! At round `t` let `W` be the set of non-empty bins of the original process
//! at round `t - 1`. When `|W| <= 3n/4`, the `i`-th Tetris arrival lands
//! where the ball leaving the `i`-th bin of `W` (ascending order) lands and
//! the remaining `3n/4 - |W|` arrivals are fresh uniform draws. Otherwise all
//! Tetris arrivals are fresh. Either way every Tetris arrival is uniform and
//! independent of the others, so both marginals are unchanged.
//!
//! While the first case applies, `q_u <= q̂_u` for all `u` is preserved:
//! both sides lose at most one ball per bin and the original's arrivals are
//! a sub-multiset of the Tetris arrivals.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::Serialize;

use crate::configuration::{Configuration, LoadStats};
use crate::error::{Error, Result};
use crate::process::{self, DestinationDraws, RoundRecord, Trajectory};
use crate::rng::{self, Purpose, StreamRng};
use crate::tetris::{arrivals_per_round, TetrisState};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CouplingFlags {
    /// `|W^(t-1)| <= 3n/4`: arrivals were matched.
    pub coupled: bool,
    /// The original process has at least `n/4` empty bins.
    pub empty_event: bool,
    /// Every Tetris bin holds at least as many balls as the original bin.
    pub dominance: bool,
}

fn check_n(n: usize) -> Result<()> {
    if n % 4 != 0 {
        return Err(Error::NotDivisibleByFour(n));
    }
    if n < 4 {
        return Err(Error::TetrisTooSmall(n));
    }
    Ok(())
}

fn dominates(tetris: &[u32], original: &[u32]) -> bool {
    tetris.iter().zip(original).all(|(h, q)| h >= q)
}

/// Number of free (unmatched) Tetris arrivals when `nonempty` bins eject.
pub fn free_arrivals(n: usize, nonempty: usize) -> usize {
    let total = arrivals_per_round(n);
    if nonempty <= total {
        total - nonempty
    } else {
        total
    }
}

/// One coupled round with explicit randomness: `draws` for the original
/// process and `free` for the unmatched Tetris arrivals.
pub fn coupled_step_with(
    q: &Configuration,
    s: &TetrisState,
    draws: &DestinationDraws,
    free: &[usize],
) -> Result<(Configuration, TetrisState, CouplingFlags)> {
    let n = q.n();
    check_n(n)?;
    if s.n() != n {
        return Err(Error::SizeMismatch(s.n(), n));
    }
    let nonempty = q.count_nonempty();
    let coupled = nonempty <= arrivals_per_round(n);
    if free.len() != free_arrivals(n, nonempty) {
        return Err(Error::Precondition(format!(
            "expected {} free arrivals, got {}",
            free_arrivals(n, nonempty),
            free.len()
        )));
    }
    let next = process::step(q, draws);
    let mut arrivals: Vec<usize> = Vec::with_capacity(arrivals_per_round(n));
    if coupled {
        arrivals.extend(draws.pairs().map(|(_, v)| v));
    }
    arrivals.extend_from_slice(free);
    let mut hat = s.clone();
    hat.step_with_arrivals(&arrivals)?;
    let flags = CouplingFlags {
        coupled,
        empty_event: 4 * next.count_empty() >= n,
        dominance: dominates(hat.loads(), next.loads()),
    };
    Ok((next, hat, flags))
}

/// One coupled round drawing from `rng`: first the original destinations in
/// ascending bin order, then the free Tetris arrivals.
pub fn coupled_step<R: Rng + ?Sized>(
    q: &Configuration,
    s: &TetrisState,
    rng: &mut R,
) -> Result<(Configuration, TetrisState, CouplingFlags)> {
    let n = q.n();
    check_n(n)?;
    let topo = Topology::complete(n)?;
    let draws = DestinationDraws::draw(q, &topo, rng);
    let pick = Uniform::new(0, n).expect("n >= 4");
    let free: Vec<usize> = (0..free_arrivals(n, draws.len()))
        .map(|_| pick.sample(rng))
        .collect();
    coupled_step_with(q, s, &draws, &free)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoupledRecord {
    pub round: u64,
    pub original: RoundRecord,
    pub tetris_max_load: u32,
    pub flags: CouplingFlags,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoupledTrajectory {
    pub records: Vec<CoupledRecord>,
    /// Running maximum load of the original process (`M_T`).
    pub original_max: u32,
    /// Running maximum load of the Tetris process (`M̂_T`).
    pub tetris_max: u32,
    /// Rounds at which arrivals could not be matched.
    pub uncoupled_rounds: u64,
    /// Rounds at which dominance failed.
    pub dominance_failures: u64,
    /// Rounds at which the original had fewer than `n/4` empty bins.
    pub empty_event_failures: u64,
}

impl CoupledTrajectory {
    pub fn dominance_held(&self) -> bool {
        self.dominance_failures == 0
    }

    pub fn original(&self) -> Trajectory {
        Trajectory {
            records: self.records.iter().map(|r| r.original).collect(),
        }
    }

    /// Dominance can only fail at or after a round whose arrivals were not
    /// matched.
    pub fn failures_follow_uncoupled_rounds(&self) -> bool {
        let mut uncoupled_seen = false;
        for r in &self.records {
            uncoupled_seen |= !r.flags.coupled;
            if !r.flags.dominance && !uncoupled_seen {
                return false;
            }
        }
        true
    }
}

/// Options for [`coupled_run_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledRunOptions {
    /// Keep every round's record; otherwise only the summary counters.
    pub record: bool,
}

impl Default for CoupledRunOptions {
    fn default() -> Self {
        Self { record: true }
    }
}

/// Runs both processes from `q0` for `rounds` coupled rounds on trial 0.
pub fn coupled_run(q0: &Configuration, rounds: u64, seed: u64) -> Result<CoupledTrajectory> {
    coupled_run_with(q0, rounds, seed, 0, CoupledRunOptions::default())
}

pub fn coupled_run_with(
    q0: &Configuration,
    rounds: u64,
    seed: u64,
    trial: u64,
    options: CoupledRunOptions,
) -> Result<CoupledTrajectory> {
    let n = q0.n();
    check_n(n)?;
    if q0.balls() != n as u64 {
        return Err(Error::Precondition(format!("need m = n = {n} balls, got {}", q0.balls())));
    }
    if 4 * q0.count_empty() < n {
        return Err(Error::Precondition(format!(
            "need at least n/4 = {} empty bins, got {}",
            n / 4,
            q0.count_empty()
        )));
    }
    let mut rng = rng::stream(seed, trial, Purpose::Coupling);
    Ok(CoupledStepper::new(q0)?.run(rounds, &mut rng, options))
}

/// In-place coupled simulator consuming the stream exactly as
/// [`coupled_step`] does.
struct CoupledStepper {
    original: Vec<u32>,
    tetris: TetrisState,
    arrivals: Vec<u32>,
    dests: Vec<u32>,
    pick: Uniform<usize>,
}

impl CoupledStepper {
    fn new(q0: &Configuration) -> Result<Self> {
        let n = q0.n();
        Ok(Self {
            original: q0.loads().to_vec(),
            tetris: TetrisState::from_configuration(q0)?,
            arrivals: vec![0; n],
            dests: Vec::with_capacity(n),
            pick: Uniform::new(0, n).expect("n >= 4"),
        })
    }

    fn record(&self, round: u64, flags: CouplingFlags) -> CoupledRecord {
        CoupledRecord {
            round,
            original: RoundRecord::new(round, LoadStats::of(&self.original)),
            tetris_max_load: self.tetris.max_load(),
            flags,
        }
    }

    fn step(&mut self, rng: &mut StreamRng) -> CouplingFlags {
        let n = self.original.len();
        self.dests.clear();
        for u in 0..n {
            if self.original[u] > 0 {
                self.original[u] -= 1;
                let v = self.pick.sample(rng);
                self.arrivals[v] += 1;
                self.dests.push(v as u32);
            }
        }
        let coupled = self.dests.len() <= arrivals_per_round(n);
        let free = free_arrivals(n, self.dests.len());
        self.tetris.depart();
        {
            let hat = self.tetris.arrivals_mut();
            if coupled {
                for &v in &self.dests {
                    hat[v as usize] += 1;
                }
            }
            for _ in 0..free {
                hat[self.pick.sample(rng)] += 1;
            }
        }
        self.tetris.finish();
        let mut empty = 0;
        for (l, a) in self.original.iter_mut().zip(self.arrivals.iter_mut()) {
            *l += *a;
            *a = 0;
            empty += (*l == 0) as usize;
        }
        CouplingFlags {
            coupled,
            empty_event: 4 * empty >= n,
            dominance: dominates(self.tetris.loads(), &self.original),
        }
    }

    fn run(mut self, rounds: u64, rng: &mut StreamRng, options: CoupledRunOptions) -> CoupledTrajectory {
        let initial = CouplingFlags {
            coupled: true,
            empty_event: 4 * self.original.iter().filter(|&&l| l == 0).count() >= self.original.len(),
            dominance: dominates(self.tetris.loads(), &self.original),
        };
        let first = self.record(0, initial);
        let mut out = CoupledTrajectory {
            records: Vec::new(),
            original_max: first.original.max_load,
            tetris_max: first.tetris_max_load,
            uncoupled_rounds: 0,
            dominance_failures: 0,
            empty_event_failures: 0,
        };
        if options.record {
            out.records.reserve(rounds as usize + 1);
            out.records.push(first);
        }
        for t in 1..=rounds {
            let flags = self.step(rng);
            let max = self.original.iter().copied().max().unwrap_or(0);
            out.original_max = out.original_max.max(max);
            out.tetris_max = out.tetris_max.max(self.tetris.max_load());
            out.uncoupled_rounds += (!flags.coupled) as u64;
            out.dominance_failures += (!flags.dominance) as u64;
            out.empty_event_failures += (!flags.empty_event) as u64;
            if options.record {
                out.records.push(self.record(t, flags));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn cfg(v: &[u32]) -> Configuration {
        Configuration::new(v.to_vec()).unwrap()
    }

    #[test]
    fn full_matching_forced() {
        let q = cfg(&[1, 1, 1, 0]);
        let s = TetrisState::from_configuration(&q).unwrap();
        let t = Topology::complete(4).unwrap();
        let d = DestinationDraws::from_pairs(&q, &t, &[(0, 3), (1, 3), (2, 3)]).unwrap();
        let (q1, s1, f) = coupled_step_with(&q, &s, &d, &[]).unwrap();
        assert_eq!(q1.loads(), &[0, 0, 0, 3]);
        assert_eq!(s1.loads(), &[0, 0, 0, 3]);
        assert!(f.coupled && f.dominance && f.empty_event);
    }

    #[test]
    fn partial_matching_keeps_dominance() {
        // n = 8: 6 arrivals, |W| = 4 gives 4 matched and 2 free.
        let q = cfg(&[3, 0, 2, 0, 1, 0, 2, 0]);
        let s = TetrisState::new(vec![3, 1, 2, 0, 4, 0, 2, 1]).unwrap();
        let t = Topology::complete(8).unwrap();
        let d = DestinationDraws::from_pairs(&q, &t, &[(0, 1), (2, 1), (4, 7), (6, 6)]).unwrap();
        assert_eq!(free_arrivals(8, 4), 2);
        assert!(coupled_step_with(&q, &s, &d, &[5]).is_err());
        let (q1, s1, f) = coupled_step_with(&q, &s, &d, &[5, 0]).unwrap();
        // original: (2,0,1,0,0,0,1,0) + arrivals {1,1,7,6}
        assert_eq!(q1.loads(), &[2, 2, 1, 0, 0, 0, 2, 1]);
        // tetris: (2,0,1,0,3,0,1,0) + {1,1,7,6} + {5,0}
        assert_eq!(s1.loads(), &[3, 2, 1, 0, 3, 1, 2, 1]);
        assert!(f.coupled && f.dominance);
    }

    #[test]
    fn case_two_uses_only_fresh_arrivals() {
        // 8 bins all non-empty: |W| = 8 > 6.
        let q = cfg(&[1; 8]);
        let s = TetrisState::from_configuration(&q).unwrap();
        let t = Topology::complete(8).unwrap();
        let pairs: Vec<(usize, usize)> = (0..8).map(|u| (u, 0)).collect();
        let d = DestinationDraws::from_pairs(&q, &t, &pairs).unwrap();
        let (q1, s1, f) = coupled_step_with(&q, &s, &d, &[1, 2, 3, 4, 5, 6]).unwrap();
        assert!(!f.coupled);
        assert_eq!(q1.loads(), &[8, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(s1.loads(), &[0, 1, 1, 1, 1, 1, 1, 0]);
        assert!(!f.dominance);
    }

    #[test]
    fn rejects_bad_sizes() {
        let q = cfg(&[1; 10]);
        let s = TetrisState::from_configuration(&q).unwrap();
        let mut r = stream(0, 0, Purpose::Coupling);
        assert_eq!(coupled_step(&q, &s, &mut r).unwrap_err(), Error::NotDivisibleByFour(10));
        assert_eq!(coupled_run(&q, 5, 0).unwrap_err(), Error::NotDivisibleByFour(10));
        // too few empty bins
        assert!(coupled_run(&cfg(&[1; 8]), 5, 0).is_err());
        // wrong ball count
        assert!(coupled_run(&cfg(&[2, 0, 0, 0]), 5, 0).is_err());
    }

    #[test]
    fn zero_rounds_trivially_dominates() {
        let q = Configuration::all_in_one(16, 16, 0).unwrap();
        let tr = coupled_run(&q, 0, 3).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert!(tr.dominance_held());
        assert_eq!(tr.original_max, 16);
        assert_eq!(tr.tetris_max, 16);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn stepper_matches_functional_step(seed in any::<u64>(), k in 1usize..5, hot in 0usize..16) {
            let n = 4 * k;
            let q = Configuration::all_in_one(n, n as u32, hot % n).unwrap();
            let tr = coupled_run_with(&q, 30, seed, 2, CoupledRunOptions { record: true }).unwrap();
            let mut r = stream(seed, 2, Purpose::Coupling);
            let mut cur = q.clone();
            let mut hat = TetrisState::from_configuration(&q).unwrap();
            for t in 1..=30usize {
                let (q1, s1, f) = coupled_step(&cur, &hat, &mut r).unwrap();
                prop_assert_eq!(tr.records[t].flags, f);
                prop_assert_eq!(tr.records[t].original.max_load, q1.max_load());
                prop_assert_eq!(tr.records[t].tetris_max_load, s1.max_load());
                cur = q1;
                hat = s1;
            }
            prop_assert!(tr.failures_follow_uncoupled_rounds());
        }

        #[test]
        fn dominance_is_inductive_under_matching(
            base in prop::collection::vec(0u32..4, 8),
            extra in prop::collection::vec(0u32..3, 8),
            seed in any::<u64>(),
        ) {
            let q = Configuration::new(base.clone()).unwrap();
            prop_assume!(q.count_nonempty() <= 6);
            let hat_loads: Vec<u32> = base.iter().zip(&extra).map(|(a, b)| a + b).collect();
            let s = TetrisState::new(hat_loads).unwrap();
            let mut r = stream(seed, 0, Purpose::Coupling);
            let (q1, s1, f) = coupled_step(&q, &s, &mut r).unwrap();
            prop_assert!(f.coupled);
            prop_assert!(f.dominance);
            prop_assert!(s1.loads().iter().zip(q1.loads()).all(|(h, o)| h >= o));
        }
    }
}
