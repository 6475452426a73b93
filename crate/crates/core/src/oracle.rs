//! Exact distributions of the chain on tiny instances.
//!
//! A configuration with `k` non-empty bins has `n^k` equally likely
//! destination assignments; enumerating them pushes an exact rational
//! distribution forward one round. Bins are distinguishable, so events such
//! as "arrivals at bin 0 in round 2" are well defined. A ball that leaves a
//! bin and lands back in it counts as an arrival there.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::configuration::Configuration;
use crate::error::{Error, Result};

/// Largest number of configurations the oracle will hold.
pub const MAX_STATES: u64 = 20_000;
/// Largest number of destination assignments enumerated per round.
pub const MAX_WORK_PER_ROUND: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    n: usize,
    balls: u64,
    round: u64,
    mass: BTreeMap<Vec<u32>, BigRational>,
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Guards state count and per-round enumeration work for `n` bins, `m` balls.
pub fn check_size(n: usize, m: u64) -> Result<()> {
    let states = binomial(m + n as u64 - 1, n as u64 - 1);
    if states > MAX_STATES {
        return Err(Error::SizeGuard(format!("{states} configurations for n = {n}, m = {m}")));
    }
    let k = (n as u64).min(m) as u32;
    let per_state = (n as u64).checked_pow(k).unwrap_or(u64::MAX);
    if per_state.saturating_mul(states) > MAX_WORK_PER_ROUND {
        return Err(Error::SizeGuard(format!(
            "{states} configurations x {per_state} assignments per round for n = {n}, m = {m}"
        )));
    }
    Ok(())
}

/// Visits every assignment of destinations to the non-empty bins of `loads`
/// with the resulting configuration and per-bin arrival counts.
fn for_each_assignment(loads: &[u32], mut f: impl FnMut(&[u32], &[u32])) {
    let n = loads.len();
    let sources: Vec<usize> = (0..n).filter(|&u| loads[u] > 0).collect();
    let base: Vec<u32> = loads.iter().map(|&l| l.saturating_sub(1)).collect();
    let mut digits = vec![0usize; sources.len()];
    let mut next = base.clone();
    let mut arrivals = vec![0u32; n];
    loop {
        next.copy_from_slice(&base);
        arrivals.iter_mut().for_each(|a| *a = 0);
        for &d in &digits {
            next[d] += 1;
            arrivals[d] += 1;
        }
        f(&next, &arrivals);
        // mixed-radix increment
        let mut i = 0;
        loop {
            if i == digits.len() {
                return;
            }
            digits[i] += 1;
            if digits[i] < n {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn assignments(n: usize, loads: &[u32]) -> BigInt {
    let k = loads.iter().filter(|&&l| l > 0).count();
    BigInt::from(n).pow(k as u32)
}

impl ExactDistribution {
    pub fn point_mass(q: &Configuration) -> Result<Self> {
        check_size(q.n(), q.balls())?;
        let mut mass = BTreeMap::new();
        mass.insert(q.loads().to_vec(), BigRational::one());
        Ok(Self {
            n: q.n(),
            balls: q.balls(),
            round: 0,
            mass,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn support(&self) -> impl Iterator<Item = (&[u32], &BigRational)> {
        self.mass.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn probability(&self, loads: &[u32]) -> BigRational {
        self.mass.get(loads).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total_mass(&self) -> BigRational {
        self.mass.values().fold(BigRational::zero(), |a, b| a + b)
    }

    /// Exact one-round pushforward.
    pub fn evolve(&self) -> Result<Self> {
        check_size(self.n, self.balls)?;
        let mut mass: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
        for (loads, p) in &self.mass {
            let share = p / BigRational::from_integer(assignments(self.n, loads));
            for_each_assignment(loads, |next, _| {
                *mass.entry(next.to_vec()).or_insert_with(BigRational::zero) += &share;
            });
        }
        Ok(Self {
            n: self.n,
            balls: self.balls,
            round: self.round + 1,
            mass,
        })
    }

    pub fn evolve_rounds(&self, rounds: u64) -> Result<Self> {
        let mut d = self.clone();
        for _ in 0..rounds {
            d = d.evolve()?;
        }
        Ok(d)
    }
}

pub fn evolve_exact(d: &ExactDistribution) -> Result<ExactDistribution> {
    d.evolve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalPredicate {
    Eq(u32),
    AtMost(u32),
    AtLeast(u32),
}

impl ArrivalPredicate {
    pub fn holds(self, arrivals: u32) -> bool {
        match self {
            ArrivalPredicate::Eq(k) => arrivals == k,
            ArrivalPredicate::AtMost(k) => arrivals <= k,
            ArrivalPredicate::AtLeast(k) => arrivals >= k,
        }
    }
}

/// "The number of balls arriving at `bin` during round `round` satisfies
/// `predicate`". Rounds are numbered from 1 (the first transition).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrivalEvent {
    pub round: u64,
    pub bin: usize,
    pub predicate: ArrivalPredicate,
}

impl ArrivalEvent {
    pub fn new(round: u64, bin: usize, predicate: ArrivalPredicate) -> Self {
        Self { round, bin, predicate }
    }
}

/// Exact probability that every event holds, starting from `q0`.
pub fn joint_event_probability(q0: &Configuration, events: &[ArrivalEvent]) -> Result<BigRational> {
    let n = q0.n();
    check_size(n, q0.balls())?;
    if let Some(e) = events.iter().find(|e| e.round == 0 || e.bin >= n) {
        return Err(Error::Precondition(format!(
            "event at round {} bin {} is not a recorded arrival",
            e.round, e.bin
        )));
    }
    let horizon = events.iter().map(|e| e.round).max().unwrap_or(0);
    let mut mass: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
    mass.insert(q0.loads().to_vec(), BigRational::one());
    for round in 1..=horizon {
        let now: Vec<&ArrivalEvent> = events.iter().filter(|e| e.round == round).collect();
        let mut next_mass: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
        for (loads, p) in &mass {
            let share = p / BigRational::from_integer(assignments(n, loads));
            for_each_assignment(loads, |next, arrivals| {
                if now.iter().all(|e| e.predicate.holds(arrivals[e.bin])) {
                    *next_mass.entry(next.to_vec()).or_insert_with(BigRational::zero) += &share;
                }
            });
        }
        mass = next_mass;
    }
    Ok(mass.values().fold(BigRational::zero(), |a, b| a + b))
}

/// The three probabilities of the negative-association counterexample on
/// two bins from `(1, 1)`: `P[X1 = 0]`, `P[X2 = 0]` and `P[X1 = 0, X2 = 0]`,
/// where `Xr` counts arrivals at bin 0 in round `r`.
pub fn association_counterexample() -> Result<[BigRational; 3]> {
    let q0 = Configuration::new(vec![1, 1])?;
    let x1 = ArrivalEvent::new(1, 0, ArrivalPredicate::Eq(0));
    let x2 = ArrivalEvent::new(2, 0, ArrivalPredicate::Eq(0));
    Ok([
        joint_event_probability(&q0, &[x1])?,
        joint_event_probability(&q0, &[x2])?,
        joint_event_probability(&q0, &[x1, x2])?,
    ])
}

/// Expected round at which one ball on the complete graph with self-loops
/// has visited all `n` bins, its start bin counting as visited: the sum of
/// `n / (n - k)` over `k = 1..n`, i.e. `n · H_{n-1}`.
pub fn single_ball_cover_mean(n: usize) -> Result<BigRational> {
    if n < 2 {
        return Err(Error::TooFewBins(n));
    }
    let nn = BigInt::from(n);
    Ok((1..n).fold(BigRational::zero(), |acc, k| {
        acc + BigRational::new(nn.clone(), BigInt::from(n - k))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn cfg(v: &[u32]) -> Configuration {
        Configuration::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_bins_one_round() {
        let d = ExactDistribution::point_mass(&cfg(&[1, 1])).unwrap().evolve().unwrap();
        assert_eq!(d.probability(&[2, 0]), r(1, 4));
        assert_eq!(d.probability(&[0, 2]), r(1, 4));
        assert_eq!(d.probability(&[1, 1]), r(1, 2));
        assert_eq!(d.round(), 1);
    }

    #[test]
    fn zero_rounds_is_identity() {
        let q = cfg(&[4, 0, 0, 0]);
        let d = ExactDistribution::point_mass(&q).unwrap().evolve_rounds(0).unwrap();
        assert_eq!(d.support().count(), 1);
        assert_eq!(d.probability(q.loads()), r(1, 1));
    }

    #[test]
    fn mass_is_conserved_exactly() {
        let mut d = ExactDistribution::point_mass(&cfg(&[2, 0, 1, 1])).unwrap();
        for _ in 0..5 {
            d = d.evolve().unwrap();
            assert_eq!(d.total_mass(), r(1, 1));
            assert!(d.support().all(|(l, _)| l.iter().sum::<u32>() == 4));
        }
    }

    #[test]
    fn counterexample_values() {
        let [p1, p2, p12] = association_counterexample().unwrap();
        assert_eq!(p1, r(1, 4));
        assert_eq!(p2, r(3, 8));
        assert_eq!(p12, r(1, 8));
        assert!(p12 > &p1 * &p2);
        assert_eq!(&p1 * &p2, r(3, 32));
    }

    #[test]
    fn first_round_arrivals_are_binomial() {
        let q = cfg(&[1, 1, 1]);
        let expected = [r(8, 27), r(12, 27), r(6, 27), r(1, 27)];
        for (k, e) in expected.iter().enumerate() {
            let ev = ArrivalEvent::new(1, 0, ArrivalPredicate::Eq(k as u32));
            assert_eq!(&joint_event_probability(&q, &[ev]).unwrap(), e);
        }
        let le1 = ArrivalEvent::new(1, 0, ArrivalPredicate::AtMost(1));
        assert_eq!(joint_event_probability(&q, &[le1]).unwrap(), r(20, 27));
        let ge2 = ArrivalEvent::new(1, 0, ArrivalPredicate::AtLeast(2));
        assert_eq!(joint_event_probability(&q, &[ge2]).unwrap(), r(7, 27));
    }

    #[test]
    fn size_guard() {
        assert!(check_size(4, 4).is_ok());
        assert!(matches!(check_size(12, 12), Err(Error::SizeGuard(_))));
        let big = Configuration::flat(12).unwrap();
        assert!(ExactDistribution::point_mass(&big).is_err());
        let bad = ArrivalEvent::new(0, 0, ArrivalPredicate::Eq(0));
        assert!(joint_event_probability(&cfg(&[1, 1]), &[bad]).is_err());
    }
    #[test]
    fn single_ball_cover_mean_agrees_with_inclusion_exclusion() {
        assert_eq!(single_ball_cover_mean(4).unwrap(), r(22, 3));
        assert_eq!(single_ball_cover_mean(2).unwrap(), r(2, 1));
        // E[T] = sum_t P[T > t] with P[T > t] by inclusion-exclusion over
        // the unvisited bins: sum_j (-1)^(j+1) C(n-1, j) n / j.
        for n in 2..12usize {
            let mut e = BigRational::zero();
            let mut c = BigInt::one();
            for j in 1..n {
                c = c * BigInt::from(n - j) / BigInt::from(j);
                let term = BigRational::new(&c * BigInt::from(n), BigInt::from(j));
                e = if j % 2 == 1 { e + term } else { e - term };
            }
            assert_eq!(single_ball_cover_mean(n).unwrap(), e, "n = {n}");
        }
        assert!(single_ball_cover_mean(1).is_err());
    }
}
