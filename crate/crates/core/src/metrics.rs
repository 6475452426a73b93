//! Legitimacy, convergence time, cover time, progress and adversarial faults.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bounds::legitimacy_threshold;
use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::ledger::{BallId, BallLedger, Strategy};
use crate::process::{Process, Tracking};
use crate::rng::{self, Purpose, StreamRng};
use crate::topology::Topology;

/// Default constant `C` of the legitimacy threshold `C ln n`.
pub const DEFAULT_THRESHOLD_C: f64 = 10.0;

/// `max_load(q) <= C ln n`.
pub fn is_legitimate(q: &Configuration, c: f64) -> bool {
    max_load_is_legitimate(q.max_load(), q.n(), c)
}

pub fn max_load_is_legitimate(max_load: u32, n: usize, c: f64) -> bool {
    max_load as f64 <= legitimacy_threshold(c, n)
}

/// First round `t <= max_rounds` at which the process from `q0` is
/// legitimate, on the given trial's streams.
pub fn convergence_time_trial(
    q0: &Configuration,
    c: f64,
    max_rounds: u64,
    seed: u64,
    trial: u64,
) -> Result<Option<u64>> {
    if c <= 0.0 {
        return Err(Error::Precondition(format!("threshold constant must be positive, got {c}")));
    }
    let n = q0.n();
    let mut p = Process::new(q0, Topology::complete(n)?, Strategy::Fifo, Tracking::LoadsOnly, seed, trial)?;
    if is_legitimate(q0, c) {
        return Ok(Some(0));
    }
    while p.round() < max_rounds {
        let s = p.step();
        if max_load_is_legitimate(s.max_load, n, c) {
            return Ok(Some(p.round()));
        }
    }
    Ok(None)
}

pub fn convergence_time(q0: &Configuration, c: f64, max_rounds: u64, seed: u64) -> Result<Option<u64>> {
    convergence_time_trial(q0, c, max_rounds, seed, 0)
}

/// Adversarial reassignment of balls to bins.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    /// Every ball moved to `target`.
    AllInOne { target: usize },
    /// Bin contents shuffled by a uniform permutation of bins.
    Permute,
    /// Arbitrary generator `(current, round, rng) -> new configuration`.
    #[serde(skip)]
    Custom(Arc<dyn Fn(&Configuration, u64, &mut StreamRng) -> Configuration + Send + Sync>),
}

impl fmt::Debug for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::AllInOne { target } => write!(f, "AllInOne {{ target: {target} }}"),
            FaultKind::Permute => write!(f, "Permute"),
            FaultKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PartialEq for FaultKind {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (FaultKind::AllInOne { target: a }, FaultKind::AllInOne { target: b }) => a == b,
            (FaultKind::Permute, FaultKind::Permute) => true,
            (FaultKind::Custom(a), FaultKind::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl std::str::FromStr for FaultKind {
    type Err = Error;

    /// `all-in-one`, `all-in-one:<bin>` or `permute`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSpec(format!("unknown fault kind {s:?}"));
        match s.split_once(':') {
            None if s == "all-in-one" => Ok(FaultKind::AllInOne { target: 0 }),
            None if s == "permute" => Ok(FaultKind::Permute),
            Some(("all-in-one", bin)) => Ok(FaultKind::AllInOne {
                target: bin.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Faults strike at every positive multiple of `period`, right after that
/// round's step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSchedule {
    pub period: u64,
    pub kind: FaultKind,
}

impl FaultSchedule {
    pub fn new(period: u64, kind: FaultKind) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidSpec("fault period must be at least 1".into()));
        }
        Ok(Self { period, kind })
    }

    pub fn is_due(&self, round: u64) -> bool {
        round > 0 && round % self.period == 0
    }
}

/// New configuration plus, for bin permutations, where each bin's contents
/// went.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultOutcome {
    pub configuration: Configuration,
    pub bin_map: Option<Vec<usize>>,
}

fn fault_outcome(q: &Configuration, kind: &FaultKind, round: u64, rng: &mut StreamRng) -> Result<FaultOutcome> {
    let n = q.n();
    let out = match kind {
        FaultKind::AllInOne { target } => FaultOutcome {
            configuration: Configuration::all_in_one(
                n,
                u32::try_from(q.balls()).map_err(|_| Error::Precondition("too many balls".into()))?,
                *target,
            )?,
            bin_map: None,
        },
        FaultKind::Permute => {
            let mut map: Vec<usize> = (0..n).collect();
            map.shuffle(rng);
            let mut loads = vec![0; n];
            for (u, &l) in q.loads().iter().enumerate() {
                loads[map[u]] = l;
            }
            FaultOutcome {
                configuration: Configuration::new(loads)?,
                bin_map: Some(map),
            }
        }
        FaultKind::Custom(g) => FaultOutcome {
            configuration: g(q, round, rng),
            bin_map: None,
        },
    };
    if out.configuration.n() != n {
        return Err(Error::SizeMismatch(out.configuration.n(), n));
    }
    if out.configuration.balls() != q.balls() {
        return Err(Error::FaultBallCount {
            expected: q.balls(),
            found: out.configuration.balls(),
        });
    }
    Ok(out)
}

/// The configuration an adversary installs at `round`.
pub fn apply_fault(q: &Configuration, f: &FaultSchedule, round: u64, rng: &mut StreamRng) -> Result<Configuration> {
    if !f.is_due(round) {
        return Err(Error::Precondition(format!(
            "round {round} is not a fault round for period {}",
            f.period
        )));
    }
    Ok(fault_outcome(q, &f.kind, round, rng)?.configuration)
}

/// Applies a due fault to a running process, keeping its ledger consistent.
pub fn inject_fault(p: &mut Process, f: &FaultSchedule, rng: &mut StreamRng) -> Result<bool> {
    if !f.is_due(p.round()) {
        return Ok(false);
    }
    let out = fault_outcome(&p.configuration(), &f.kind, p.round(), rng)?;
    p.replace_configuration(&out.configuration, out.bin_map.as_deref())?;
    Ok(true)
}

pub fn progress(ledger: &BallLedger, ball: BallId) -> u64 {
    ledger.progress(ball)
}

pub fn waiting_time_max(ledger: &BallLedger) -> u64 {
    ledger.waiting_time_max()
}

/// Outcome of a FIFO cover-time run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    /// Round at which each ball had visited all bins, if within the horizon.
    pub per_ball: Vec<Option<u64>>,
    /// Round by which every ball covered every bin.
    pub parallel: Option<u64>,
    pub rounds_run: u64,
    pub max_load: u32,
    pub waiting_time_max: u64,
    pub fifo_violations: u64,
    pub min_progress: u64,
    pub faults_injected: u64,
}

/// Runs FIFO from `q0` until every ball has visited every bin or
/// `max_rounds` elapse, optionally under a fault schedule.
pub fn cover_time_trial(
    q0: &Configuration,
    max_rounds: u64,
    seed: u64,
    trial: u64,
    faults: Option<&FaultSchedule>,
) -> Result<CoverReport> {
    let n = q0.n();
    let mut p = Process::new(q0, Topology::complete(n)?, Strategy::Fifo, Tracking::BallsAndVisits, seed, trial)?;
    let mut fault_rng = rng::stream(seed, trial, Purpose::Fault);
    let mut max_load = q0.max_load();
    let mut faults_injected = 0;
    while p.round() < max_rounds && !p.ledger().expect("tracked").all_covered() {
        max_load = max_load.max(p.step().max_load);
        if let Some(f) = faults {
            if inject_fault(&mut p, f, &mut fault_rng)? {
                faults_injected += 1;
                max_load = max_load.max(p.stats().max_load);
            }
        }
    }
    let rounds_run = p.round();
    let ledger = p.into_ledger().expect("tracked");
    Ok(CoverReport {
        per_ball: ledger.cover_rounds().expect("visits tracked").to_vec(),
        parallel: ledger.parallel_cover_round(),
        rounds_run,
        max_load,
        waiting_time_max: ledger.waiting_time_max(),
        fifo_violations: ledger.fifo_violations(),
        min_progress: ledger.min_progress(),
        faults_injected,
    })
}

pub fn cover_time(q0: &Configuration, max_rounds: u64, seed: u64) -> Result<CoverReport> {
    cover_time_trial(q0, max_rounds, seed, 0, None)
}
