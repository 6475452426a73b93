//! Monte Carlo experiment engine.
//!
//! An [`ExperimentSpec`] fixes everything about a run, including the master
//! seed. Trial `i` draws all of its randomness from streams keyed by
//! `(seed, i, purpose)`, trials run on a rayon pool and results are folded
//! in trial-index order, so a report depends only on the spec.

mod report;
pub mod stats;
mod suites;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{Comparison, ExactRational, Relation, SummaryReport, TailFrequency};
pub use stats::{scaling_fit, wilson_interval, FitReport, MetricSummary, Moments, ScalingModel};

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::ledger::Strategy;
use crate::metrics::{FaultSchedule, DEFAULT_THRESHOLD_C};
use crate::rng::{self, Purpose};
use crate::topology::TopologySpec;

/// Environment variable selecting the number of worker threads.
pub const THREADS_ENV: &str = "RBB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExperimentKind {
    Stability,
    Stabilize,
    Tetris,
    Couple,
    Cover,
    ExactCheck,
    EmptyBins,
    Conjecture,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "STABILITY" => ExperimentKind::Stability,
            "STABILIZE" => ExperimentKind::Stabilize,
            "TETRIS" => ExperimentKind::Tetris,
            "COUPLE" => ExperimentKind::Couple,
            "COVER" => ExperimentKind::Cover,
            "EXACT_CHECK" => ExperimentKind::ExactCheck,
            "EMPTY_BINS" => ExperimentKind::EmptyBins,
            "CONJECTURE" => ExperimentKind::Conjecture,
            _ => return Err(Error::InvalidSpec(format!("unknown experiment kind {s:?}"))),
        })
    }
}

/// Initial configuration of each trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    /// Balls spread as evenly as possible, lower bins first.
    Flat,
    /// Every ball in bin 0.
    AllInOne,
    /// Each ball in an independent uniform bin, redrawn per trial.
    Random,
    /// A fixed load vector.
    Loads(Vec<u32>),
}

impl std::str::FromStr for StartKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(StartKind::Flat),
            "all-in-one" | "all_in_one" => Ok(StartKind::AllInOne),
            "random" => Ok(StartKind::Random),
            other => {
                let loads: std::result::Result<Vec<u32>, _> =
                    other.split(',').map(|x| x.trim().parse::<u32>()).collect();
                loads
                    .map(StartKind::Loads)
                    .map_err(|_| Error::InvalidSpec(format!("unknown start {other:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub n: usize,
    /// Ball count; `n` when absent.
    pub balls: Option<u64>,
    pub rounds: u64,
    pub trials: u64,
    pub strategy: Strategy,
    pub topology: TopologySpec,
    pub threshold_c: f64,
    pub beta: f64,
    pub faults: Option<FaultSchedule>,
    pub seed: u64,
    /// Kind-dependent default when absent.
    pub start: Option<StartKind>,
    pub confidence: f64,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, n: usize) -> Self {
        Self {
            kind,
            n,
            balls: None,
            rounds: 0,
            trials: 1,
            strategy: Strategy::Fifo,
            topology: TopologySpec::Complete,
            threshold_c: DEFAULT_THRESHOLD_C,
            beta: 2.0,
            faults: None,
            seed: 0,
            start: None,
            confidence: 0.95,
        }
    }

    pub fn rounds(mut self, rounds: u64) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn start(mut self, start: StartKind) -> Self {
        self.start = Some(start);
        self
    }

    pub fn balls(mut self, balls: u64) -> Self {
        self.balls = Some(balls);
        self
    }

    pub fn faults(mut self, faults: FaultSchedule) -> Self {
        self.faults = Some(faults);
        self
    }

    pub fn topology(mut self, topology: TopologySpec) -> Self {
        self.topology = topology;
        self
    }

    pub fn ball_count(&self) -> u64 {
        self.balls.unwrap_or(self.n as u64)
    }

    pub fn start_kind(&self) -> StartKind {
        self.start.clone().unwrap_or(match self.kind {
            ExperimentKind::Stabilize => StartKind::AllInOne,
            ExperimentKind::Tetris | ExperimentKind::Couple => StartKind::Random,
            _ => StartKind::Flat,
        })
    }

    /// Trial `trial`'s initial configuration.
    pub fn initial_configuration(&self, trial: u64) -> Result<Configuration> {
        let n = self.n;
        let m = u32::try_from(self.ball_count()).map_err(|_| Error::InvalidSpec("too many balls".into()))?;
        match self.start_kind() {
            StartKind::Flat => {
                let (q, r) = (m / n as u32, m as usize % n);
                Configuration::new((0..n).map(|u| q + (u < r) as u32).collect())
            }
            StartKind::AllInOne => Configuration::all_in_one(n, m, 0),
            StartKind::Random => {
                let mut r = rng::stream(self.seed, trial, Purpose::InitialConfiguration);
                Configuration::uniform_random(n, m, &mut r)
            }
            StartKind::Loads(loads) => {
                let q = Configuration::new(loads)?;
                if q.n() != n || q.balls() != m as u64 {
                    return Err(Error::InvalidSpec(format!(
                        "start loads have n = {}, m = {} but the spec says n = {n}, m = {m}",
                        q.n(),
                        q.balls()
                    )));
                }
                Ok(q)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.trials > rng::MAX_TRIAL {
            return bad("too many trials".into());
        }
        if !(self.threshold_c > 0.0 && self.threshold_c.is_finite()) {
            return bad(format!("threshold constant must be positive, got {}", self.threshold_c));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad(format!("confidence must be in (0, 1), got {}", self.confidence));
        }
        if self.ball_count() > u32::MAX as u64 {
            return bad("too many balls".into());
        }
        let complete_only = !matches!(
            self.kind,
            ExperimentKind::Stability | ExperimentKind::EmptyBins | ExperimentKind::Conjecture
        );
        if complete_only && self.topology != TopologySpec::Complete {
            return bad(format!("{:?} experiments run on the complete graph only", self.kind));
        }
        if self.faults.is_some() && self.kind != ExperimentKind::Cover {
            return bad("fault schedules apply to COVER experiments only".into());
        }
        match self.kind {
            ExperimentKind::Couple => {
                if self.n % 4 != 0 {
                    return Err(Error::NotDivisibleByFour(self.n));
                }
                if self.ball_count() != self.n as u64 {
                    return bad("coupling needs m = n".into());
                }
            }
            ExperimentKind::Tetris if self.n < 4 => return Err(Error::TetrisTooSmall(self.n)),
            ExperimentKind::Cover if self.strategy != Strategy::Fifo => {
                return bad("cover experiments use the FIFO strategy".into());
            }
            ExperimentKind::ExactCheck => crate::oracle::check_size(self.n, self.ball_count())?,
            _ => {}
        }
        // Surface bad start vectors and topologies before any trial runs.
        self.initial_configuration(0)?;
        self.topology.build(self.n)?;
        Ok(())
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        b = b.num_threads(threads);
    }
    b.build().map_err(|e| Error::InvalidSpec(format!("cannot start worker pool: {e}")))
}

/// Runs `f` for every trial index on the worker pool and returns the results
/// in trial order. The first error, by trial index, wins.
pub fn run_trials<T, F>(trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    pool()?.install(|| (0..trials).into_par_iter().map(&f).collect())
}

/// Runs every trial of `spec` and aggregates them into a report.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SummaryReport> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::Stability | ExperimentKind::Conjecture => suites::stability(spec),
        ExperimentKind::Stabilize => suites::stabilize(spec),
        ExperimentKind::Tetris => suites::tetris(spec),
        ExperimentKind::Couple => suites::couple(spec),
        ExperimentKind::Cover => suites::cover(spec),
        ExperimentKind::ExactCheck => suites::exact_check(spec),
        ExperimentKind::EmptyBins => suites::empty_bins(spec),
    }
}

/// Which aggregate of a metric feeds a scaling fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Mean,
    Max,
}

/// Runs `base` at each bin count and fits `metric` against `model`.
pub fn scaling_study(
    base: &ExperimentSpec,
    ns: &[usize],
    metric: &str,
    aggregate: Aggregate,
    model: ScalingModel,
) -> Result<(Vec<SummaryReport>, FitReport)> {
    let mut reports = Vec::with_capacity(ns.len());
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut spec = base.clone();
        spec.n = n;
        if base.balls.is_some_and(|m| m == base.n as u64) {
            spec.balls = Some(n as u64);
        }
        let report = run_experiment(&spec)?;
        let m = report
            .metrics
            .get(metric)
            .ok_or_else(|| Error::InvalidSpec(format!("report has no metric {metric:?}")))?;
        points.push((
            n as f64,
            match aggregate {
                Aggregate::Mean => m.mean,
                Aggregate::Max => m.max,
            },
        ));
        reports.push(report);
    }
    let mut fit = scaling_fit(&points, model)?;
    fit.name = metric.to_string();
    Ok((reports, fit))
}

/// A seeded permutation of `0..trials`, for checking that aggregation does
/// not depend on execution order.
pub fn shuffled_trials(trials: u64, seed: u64) -> Vec<u64> {
    use rand::seq::SliceRandom;
    let mut v: Vec<u64> = (0..trials).collect();
    v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    v
}

pub(crate) type Metrics = BTreeMap<String, MetricSummary>;
