use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Which graph the balls move on, before it is instantiated for a bin count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    /// Every bin can send to every bin, itself included.
    #[default]
    Complete,
    /// Cycle; a bin sends to one of its two neighbours, never to itself.
    Ring,
    /// Uniform simple connected `degree`-regular graph drawn from `seed`.
    RandomRegular { degree: usize, seed: u64 },
}

impl TopologySpec {
    pub fn build(self, n: usize) -> Result<Topology> {
        Topology::new(self, n)
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySpec::Complete => write!(f, "complete"),
            TopologySpec::Ring => write!(f, "ring"),
            TopologySpec::RandomRegular { degree, seed } => write!(f, "regular:{degree}:{seed}"),
        }
    }
}

/// Parses `complete`, `ring`, `regular:<d>` or `regular:<d>:<seed>`.
impl FromStr for TopologySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::Topology(format!("cannot parse topology {s:?}"));
        match parts.as_slice() {
            ["complete"] => Ok(TopologySpec::Complete),
            ["ring"] => Ok(TopologySpec::Ring),
            ["regular", d] => Ok(TopologySpec::RandomRegular {
                degree: d.parse().map_err(|_| bad())?,
                seed: 0,
            }),
            ["regular", d, seed] => Ok(TopologySpec::RandomRegular {
                degree: d.parse().map_err(|_| bad())?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
enum Neighbours {
    Complete(Uniform<usize>),
    Ring,
    Regular { degree: usize, adjacency: Vec<u32>, pick: Uniform<usize> },
}

/// A topology instantiated for `n` bins, ready to sample destinations.
#[derive(Debug, Clone)]
pub struct Topology {
    spec: TopologySpec,
    n: usize,
    neighbours: Neighbours,
}

const REGULAR_ATTEMPTS: usize = 1000;

impl Topology {
    pub fn new(spec: TopologySpec, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewBins(n));
        }
        let neighbours = match spec {
            TopologySpec::Complete => Neighbours::Complete(Uniform::new(0, n).expect("n >= 2")),
            TopologySpec::Ring => {
                if n < 3 {
                    return Err(Error::Topology(format!("ring needs n >= 3, got {n}")));
                }
                Neighbours::Ring
            }
            TopologySpec::RandomRegular { degree, seed } => {
                let adjacency = random_regular(n, degree, seed)?;
                Neighbours::Regular {
                    degree,
                    adjacency,
                    pick: Uniform::new(0, degree).expect("degree >= 1"),
                }
            }
        };
        Ok(Self { spec, n, neighbours })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(TopologySpec::Complete, n)
    }

    pub fn spec(&self) -> TopologySpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.neighbours, Neighbours::Complete(_))
    }

    /// Uniform destination for a ball leaving `bin`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, bin: usize, rng: &mut R) -> usize {
        match &self.neighbours {
            Neighbours::Complete(u) => u.sample(rng),
            Neighbours::Ring => {
                if rng.random::<bool>() {
                    (bin + 1) % self.n
                } else {
                    (bin + self.n - 1) % self.n
                }
            }
            Neighbours::Regular { degree, adjacency, pick } => {
                adjacency[bin * degree + pick.sample(rng)] as usize
            }
        }
    }

    pub fn is_neighbour(&self, from: usize, to: usize) -> bool {
        if from >= self.n || to >= self.n {
            return false;
        }
        match &self.neighbours {
            Neighbours::Complete(_) => true,
            Neighbours::Ring => to == (from + 1) % self.n || to == (from + self.n - 1) % self.n,
            Neighbours::Regular { degree, adjacency, .. } => adjacency
                [from * degree..(from + 1) * degree]
                .contains(&(to as u32)),
        }
    }

    pub fn neighbours(&self, bin: usize) -> Vec<usize> {
        match &self.neighbours {
            Neighbours::Complete(_) => (0..self.n).collect(),
            Neighbours::Ring => {
                let mut v = vec![(bin + self.n - 1) % self.n, (bin + 1) % self.n];
                v.sort_unstable();
                v.dedup();
                v
            }
            Neighbours::Regular { degree, adjacency, .. } => adjacency
                [bin * degree..(bin + 1) * degree]
                .iter()
                .map(|&v| v as usize)
                .collect(),
        }
    }
}

/// Pairing construction with incremental rejection: points are matched one
/// pair at a time, skipping pairs that would create a loop or a multi-edge,
/// and the whole attempt restarts when it gets stuck or the result is
/// disconnected. Returns the flat sorted adjacency (`n * degree` entries).
fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Vec<u32>> {
    if degree == 0 || degree >= n {
        return Err(Error::Topology(format!("degree must be in [1, n-1], got {degree} for n = {n}")));
    }
    if (n * degree) % 2 == 1 {
        return Err(Error::Topology(format!("n * degree must be even ({n} * {degree})")));
    }
    let mut rng = rng::stream(seed, 0, Purpose::Topology);
    for _ in 0..REGULAR_ATTEMPTS {
        if let Some(adj) = try_pairing(n, degree, &mut rng) {
            if is_connected(n, degree, &adj) {
                return Ok(adj);
            }
        }
    }
    Err(Error::Topology(format!(
        "no connected simple {degree}-regular graph on {n} vertices after {REGULAR_ATTEMPTS} attempts"
    )))
}

fn try_pairing<R: Rng + ?Sized>(n: usize, degree: usize, rng: &mut R) -> Option<Vec<u32>> {
    let mut points: Vec<u32> = (0..n as u32).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    let mut edges: HashSet<(u32, u32)> = HashSet::with_capacity(n * degree / 2);
    let key = |a: u32, b: u32| if a < b { (a, b) } else { (b, a) };
    while !points.is_empty() {
        let mut chosen = None;
        for _ in 0..64 {
            let i = rng.random_range(0..points.len());
            let j = rng.random_range(0..points.len());
            let (a, b) = (points[i], points[j]);
            if i != j && a != b && !edges.contains(&key(a, b)) {
                chosen = Some((i, j));
                break;
            }
        }
        if chosen.is_none() {
            let mut ok = Vec::new();
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    let (a, b) = (points[i], points[j]);
                    if a != b && !edges.contains(&key(a, b)) {
                        ok.push((i, j));
                    }
                }
            }
            if ok.is_empty() {
                return None;
            }
            chosen = Some(ok[rng.random_range(0..ok.len())]);
        }
        let (i, j) = chosen?;
        edges.insert(key(points[i], points[j]));
        let (hi, lo) = if i > j { (i, j) } else { (j, i) };
        points.swap_remove(hi);
        points.swap_remove(lo);
    }
    let mut lists = vec![Vec::with_capacity(degree); n];
    for (a, b) in edges {
        lists[a as usize].push(b);
        lists[b as usize].push(a);
    }
    let mut adj = Vec::with_capacity(n * degree);
    for mut l in lists {
        l.sort_unstable();
        adj.extend(l);
    }
    Some(adj)
}

fn is_connected(n: usize, degree: usize, adj: &[u32]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u * degree..(u + 1) * degree] {
            let v = v as usize;
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}
