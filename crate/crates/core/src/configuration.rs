use serde::Serialize;

use crate::error::{Error, Result};

/// Load vector of the repeated balls-into-bins chain.
///
/// Bins are indexed from 0. The ball count is cached and kept equal to the
/// sum of the loads by every constructor and transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Configuration {
    loads: Vec<u32>,
    balls: u64,
}

impl Configuration {
    pub fn new(loads: Vec<u32>) -> Result<Self> {
        if loads.len() < 2 {
            return Err(Error::TooFewBins(loads.len()));
        }
        let balls = loads.iter().map(|&l| l as u64).sum();
        Ok(Self { loads, balls })
    }

    /// Builds a configuration from signed input, rejecting negative entries.
    pub fn from_signed(loads: &[i64]) -> Result<Self> {
        let mut out = Vec::with_capacity(loads.len());
        for (bin, &load) in loads.iter().enumerate() {
            if load < 0 {
                return Err(Error::NegativeLoad { bin, load });
            }
            out.push(u32::try_from(load).map_err(|_| Error::LoadOverflow { bin, load })?);
        }
        Self::new(out)
    }

    /// `(1, 1, ..., 1)`.
    pub fn flat(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    /// All `balls` in bin `target`.
    pub fn all_in_one(n: usize, balls: u32, target: usize) -> Result<Self> {
        if target >= n {
            return Err(Error::Precondition(format!("target bin {target} >= n = {n}")));
        }
        let mut loads = vec![0; n];
        loads[target] = balls;
        Self::new(loads)
    }

    /// Each of `balls` balls placed independently and uniformly.
    pub fn uniform_random<R: rand::Rng + ?Sized>(n: usize, balls: u32, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewBins(n));
        }
        let mut loads = vec![0; n];
        for _ in 0..balls {
            loads[rng.random_range(0..n)] += 1;
        }
        Self::new(loads)
    }

    pub(crate) fn from_parts_unchecked(loads: Vec<u32>, balls: u64) -> Self {
        debug_assert_eq!(loads.iter().map(|&l| l as u64).sum::<u64>(), balls);
        Self { loads, balls }
    }

    pub fn n(&self) -> usize {
        self.loads.len()
    }

    pub fn balls(&self) -> u64 {
        self.balls
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    pub fn load(&self, bin: usize) -> u32 {
        self.loads[bin]
    }

    pub fn into_loads(self) -> Vec<u32> {
        self.loads
    }

    pub fn count_empty(&self) -> usize {
        self.loads.iter().filter(|&&l| l == 0).count()
    }

    pub fn count_singleton(&self) -> usize {
        self.loads.iter().filter(|&&l| l == 1).count()
    }

    pub fn count_overloaded(&self) -> usize {
        self.loads.iter().filter(|&&l| l >= 2).count()
    }

    pub fn count_nonempty(&self) -> usize {
        self.loads.iter().filter(|&&l| l > 0).count()
    }

    pub fn max_load(&self) -> u32 {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    /// Bins holding at least one ball, ascending.
    pub fn nonempty_bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.loads.iter().enumerate().filter(|(_, &l)| l > 0).map(|(u, _)| u)
    }

    pub fn stats(&self) -> LoadStats {
        LoadStats::of(&self.loads)
    }
}

/// One-pass summary of a load vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadStats {
    pub max_load: u32,
    pub empty: usize,
    pub singleton: usize,
    pub overloaded: usize,
}

impl LoadStats {
    pub fn of(loads: &[u32]) -> Self {
        let mut s = LoadStats::default();
        for &l in loads {
            match l {
                0 => s.empty += 1,
                1 => s.singleton += 1,
                _ => s.overloaded += 1,
            }
            s.max_load = s.max_load.max(l);
        }
        s
    }

    /// With `m <= n` balls every overloaded bin is paid for by an empty one:
    /// `overloaded + (n - m) <= empty`, which implies both
    /// `overloaded <= empty + (n - m)` and, for `m == n`, `overloaded <= empty`.
    pub fn overload_bound_holds(&self, n: usize, m: u64) -> bool {
        if m > n as u64 {
            return true;
        }
        self.overloaded as u64 + (n as u64 - m) <= self.empty as u64
    }
}
