//! Per-kind trial bodies and their aggregation into a [`SummaryReport`].

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::report::{Comparison, ExactRational, Relation, SummaryReport, TailFrequency};
use super::stats::{MetricSummary, Moments};
use super::{run_trials, ExperimentKind, ExperimentSpec, Metrics};
use crate::bounds::{
    between_empty_bound, between_empty_threshold, cover_time_envelope, emptying_tail_bound, legitimacy_threshold,
};
use crate::configuration::Configuration;
use crate::coupling::{coupled_run_with, CoupledRunOptions};
use crate::error::Result;
use crate::ledger::Strategy;
use crate::metrics::{cover_time_trial, max_load_is_legitimate, CoverReport};
use crate::oracle::{
    joint_event_probability, single_ball_cover_mean, ArrivalEvent, ArrivalPredicate, ExactDistribution,
};
use crate::process::{Process, Tracking};
use crate::rng::{self, Purpose};
use crate::tetris::{arrivals_per_round, TetrisState};

/// Within-tolerance multiples used by the suites.
const MEAN_SE: f64 = 5.0;
const EXACT_SE: f64 = 6.0;
const COUPON_SE: f64 = 3.0;
/// Trials per work unit in EXACT_CHECK.
const EXACT_CHUNK: u64 = 1 << 14;

struct Builder<'a> {
    spec: &'a ExperimentSpec,
    metrics: Metrics,
    tails: Vec<TailFrequency>,
    comparisons: Vec<Comparison>,
    exact: BTreeMap<String, ExactRational>,
}

impl<'a> Builder<'a> {
    fn new(spec: &'a ExperimentSpec) -> Self {
        Self {
            spec,
            metrics: BTreeMap::new(),
            tails: Vec::new(),
            comparisons: Vec::new(),
            exact: BTreeMap::new(),
        }
    }

    fn metric(&mut self, name: &str, values: impl IntoIterator<Item = f64>) {
        let v: Vec<f64> = values.into_iter().collect();
        self.metrics.insert(name.to_string(), MetricSummary::of(&v));
    }

    fn tail(&mut self, name: &str, events: u64, trials: u64, bound: Option<f64>) -> Result<()> {
        if trials > 0 {
            self.tails
                .push(TailFrequency::new(name, events, trials, self.spec.confidence, bound)?);
        }
        Ok(())
    }

    fn compare(&mut self, name: &str, empirical: f64, reference: f64, relation: Relation, se: Option<f64>) {
        self.comparisons
            .push(Comparison::new(name, empirical, reference, relation, se));
    }

    fn exact(&mut self, name: &str, r: &BigRational) -> Result<()> {
        self.exact.insert(name.to_string(), ExactRational::try_from(r)?);
        Ok(())
    }

    fn finish(self) -> SummaryReport {
        SummaryReport {
            kind: self.spec.kind,
            spec: self.spec.clone(),
            trials: self.spec.trials,
            metrics: self.metrics,
            tails: self.tails,
            comparisons: self.comparisons,
            exact: self.exact,
            fits: Vec::new(),
        }
    }
}

fn max_of<T: Copy + Into<f64>>(xs: impl IntoIterator<Item = T>) -> f64 {
    xs.into_iter().map(Into::into).fold(f64::NEG_INFINITY, f64::max)
}

fn min_of<T: Copy + Into<f64>>(xs: impl IntoIterator<Item = T>) -> f64 {
    xs.into_iter().map(Into::into).fold(f64::INFINITY, f64::min)
}

struct StabilityTrial {
    max_load: u32,
    overload_violations: u64,
    empty_violations: u64,
    illegitimate_rounds: u64,
    fifo_violations: u64,
    max_wait: u64,
    min_progress: u64,
    consistent: bool,
}

/// STABILITY and CONJECTURE: run `T` rounds and watch the maximum load.
pub(super) fn stability(spec: &ExperimentSpec) -> Result<SummaryReport> {
    let n = spec.n;
    let m = spec.ball_count();
    let threshold = legitimacy_threshold(spec.threshold_c, n);
    let topology = spec.topology.build(n)?;
    let tracking = if spec.kind == ExperimentKind::Conjecture {
        Tracking::LoadsOnly
    } else {
        Tracking::Balls
    };
    let trials = run_trials(spec.trials, |t| {
        let q0 = spec.initial_configuration(t)?;
        let mut p = Process::new(&q0, topology.clone(), spec.strategy, tracking, spec.seed, t)?;
        let mut r = StabilityTrial {
            max_load: q0.max_load(),
            overload_violations: 0,
            empty_violations: 0,
            illegitimate_rounds: (q0.max_load() as f64 > threshold) as u64,
            fifo_violations: 0,
            max_wait: 0,
            min_progress: 0,
            consistent: true,
        };
        for _ in 0..spec.rounds {
            let s = p.step();
            r.max_load = r.max_load.max(s.max_load);
            r.overload_violations += !s.overload_bound_holds(n, m) as u64;
            r.empty_violations += (4 * s.empty < n) as u64;
            r.illegitimate_rounds += (s.max_load as f64 > threshold) as u64;
        }
        if let Some(l) = p.ledger() {
            r.fifo_violations = l.fifo_violations();
            r.max_wait = l.waiting_time_max();
            r.min_progress = l.min_progress();
            r.consistent = l.is_consistent_with(p.loads());
        }
        Ok(r)
    })?;

    let mut b = Builder::new(spec);
    let ln_n = (n as f64).ln();
    b.metric("max_load", trials.iter().map(|r| r.max_load as f64));
    b.metric("max_load_over_ln_n", trials.iter().map(|r| r.max_load as f64 / ln_n));
    let observed_rounds = spec.trials * spec.rounds;
    b.tail(
        "max_load_above_threshold",
        trials.iter().filter(|r| r.illegitimate_rounds > 0).count() as u64,
        spec.trials,
        None,
    )?;
    b.compare(
        "max_load_vs_threshold",
        max_of(trials.iter().map(|r| r.max_load)),
        threshold,
        Relation::AtMost,
        None,
    );
    if m <= n as u64 {
        let violations: u64 = trials.iter().map(|r| r.overload_violations).sum();
        b.tail("overload_bound_violated", violations, observed_rounds, Some(0.0))?;
        b.compare("overload_bound_violations", violations as f64, 0.0, Relation::AtMost, None);
    }
    if m == n as u64 {
        let violations: u64 = trials.iter().map(|r| r.empty_violations).sum();
        b.tail("empty_below_quarter", violations, observed_rounds, None)?;
    }
    if tracking == Tracking::Balls {
        b.metric("max_wait", trials.iter().map(|r| r.max_wait as f64));
        b.metric("min_progress", trials.iter().map(|r| r.min_progress as f64));
        b.compare(
            "ledger_consistent_trials",
            trials.iter().filter(|r| r.consistent).count() as f64,
            spec.trials as f64,
            Relation::AtLeast,
            None,
        );
        if spec.strategy == Strategy::Fifo {
            b.compare(
                "fifo_wait_violations",
                trials.iter().map(|r| r.fifo_violations).sum::<u64>() as f64,
                0.0,
                Relation::AtMost,
                None,
            );
            if spec.rounds > 0 {
                b.compare(
                    "min_progress_vs_rounds_over_4_ln_n",
                    min_of(trials.iter().map(|r| r.min_progress as f64)),
                    spec.rounds as f64 / (4.0 * ln_n),
                    Relation::AtLeast,
                    None,
                );
            }
        }
    }
    Ok(b.finish())
}

struct StabilizeTrial {
    convergence: Option<u64>,
    initial_max: u32,
    fifo_violations: u64,
}

/// STABILIZE: rounds until the maximum load first drops to `C ln n`.
pub(super) fn stabilize(spec: &ExperimentSpec) -> Result<SummaryReport> {
    let n = spec.n;
    let c = spec.threshold_c;
    let topology = spec.topology.build(n)?;
    let trials = run_trials(spec.trials, |t| {
        let q0 = spec.initial_configuration(t)?;
        let mut p = Process::new(&q0, topology.clone(), spec.strategy, Tracking::Balls, spec.seed, t)?;
        let mut convergence = max_load_is_legitimate(q0.max_load(), n, c).then_some(0);
        while convergence.is_none() && p.round() < spec.rounds {
            if max_load_is_legitimate(p.step().max_load, n, c) {
                convergence = Some(p.round());
            }
        }
        Ok(StabilizeTrial {
            convergence,
            initial_max: q0.max_load(),
            fifo_violations: p.ledger().map_or(0, |l| l.fifo_violations()),
        })
    })?;

    let mut b = Builder::new(spec);
    let times: Vec<f64> = trials.iter().filter_map(|r| r.convergence.map(|t| t as f64)).collect();
    b.metric("convergence_time", times.iter().copied());
    b.metric("convergence_time_over_n", times.iter().map(|t| t / n as f64));
    let six_n = 6 * n as u64;
    let within = trials.iter().filter(|r| r.convergence.is_some_and(|t| t <= six_n)).count() as u64;
    b.tail("not_converged_within_6n", spec.trials - within, spec.trials, None)?;
    b.compare("converged_within_6n", within as f64, spec.trials as f64, Relation::AtLeast, None);
    // A bin loses at most one ball per round, so legitimacy needs at least
    // `max_load(q0) - C ln n` rounds.
    let drain = trials
        .iter()
        .map(|r| r.convergence.map_or(f64::INFINITY, |t| t as f64) - (r.initial_max as f64 - legitimacy_threshold(c, n)))
        .fold(f64::INFINITY, f64::min);
    b.compare("convergence_minus_drain_bound", drain, 0.0, Relation::AtLeast, None);
    if spec.strategy == Strategy::Fifo {
        b.compare(
            "fifo_wait_violations",
            trials.iter().map(|r| r.fifo_violations).sum::<u64>() as f64,
            0.0,
            Relation::AtMost,
            None,
        );
    }
    Ok(b.finish())
}

/// Window lengths `Δ` whose arrival means are checked.
pub const TETRIS_WINDOWS: [u64; 3] = [0, 3, 15];

#[derive(Default)]
struct TetrisTrial {
    windows: [Moments; 3],
    /// Raw power sums of bin-0 per-round arrivals, for the variance check.
    power_sums: [f64; 5],
    lag_products: f64,
    lag_pairs: u64,
    all_emptied_by: Option<u64>,
    start_max: u32,
    max_load: u32,
}

/// TETRIS: arrival statistics at bin 0, emptying times, maximum load.
pub(super) fn tetris(spec: &ExperimentSpec) -> Result<SummaryReport> {
    let n = spec.n;
    let k = arrivals_per_round(n) as f64;
    let threshold = between_empty_threshold(spec.beta, n as f64)?;
    let trials = run_trials(spec.trials, |t| {
        let q0 = spec.initial_configuration(t)?;
        let mut s = TetrisState::from_configuration(&q0)?;
        let mut rng = rng::stream(spec.seed, t, Purpose::Tetris);
        let mut r = TetrisTrial {
            start_max: q0.max_load(),
            max_load: q0.max_load(),
            ..Default::default()
        };
        let mut emptied: Vec<bool> = q0.loads().iter().map(|&l| l == 0).collect();
        let mut pending = emptied.iter().filter(|e| !**e).count();
        if pending == 0 {
            r.all_emptied_by = Some(0);
        }
        let mut block = [0u64; 3];
        let mut previous: Option<f64> = None;
        for round in 1..=spec.rounds {
            s.step(&mut rng);
            let x = s.last_arrivals()[0];
            let xf = x as f64;
            let mut pw = 1.0;
            for p in r.power_sums.iter_mut() {
                *p += pw;
                pw *= xf;
            }
            if let Some(prev) = previous {
                r.lag_products += prev * xf;
                r.lag_pairs += 1;
            }
            previous = Some(xf);
            for (i, &delta) in TETRIS_WINDOWS.iter().enumerate() {
                block[i] += x as u64;
                if round % (delta + 1) == 0 {
                    r.windows[i].push(block[i] as f64);
                    block[i] = 0;
                }
            }
            r.max_load = r.max_load.max(s.max_load());
            if pending > 0 {
                for (e, &l) in emptied.iter_mut().zip(s.loads()) {
                    if !*e && l == 0 {
                        *e = true;
                        pending -= 1;
                    }
                }
                if pending == 0 {
                    r.all_emptied_by = Some(round);
                }
            }
        }
        Ok(r)
    })?;

    let mut b = Builder::new(spec);
    b.metric("max_load", trials.iter().map(|r| r.max_load as f64));
    b.metric(
        "all_bins_emptied_round",
        trials.iter().filter_map(|r| r.all_emptied_by.map(|t| t as f64)),
    );
    for (i, &delta) in TETRIS_WINDOWS.iter().enumerate() {
        let mut m = Moments::default();
        for r in &trials {
            m.merge(&r.windows[i]);
        }
        if m.count >= 2 {
            b.compare(
                &format!("window_mean_delta_{delta}"),
                m.mean,
                k / n as f64 * (delta + 1) as f64,
                Relation::Within(MEAN_SE),
                Some(m.standard_error()),
            );
        }
    }
    let mut sums = [0.0; 5];
    for r in &trials {
        for (a, x) in sums.iter_mut().zip(r.power_sums) {
            *a += x;
        }
    }
    let count = sums[0];
    if count >= 2.0 {
        let mean = sums[1] / count;
        let var = sums[2] / count - mean * mean;
        // Fourth central moment from raw moments.
        let (e2, e3, e4) = (sums[2] / count, sums[3] / count, sums[4] / count);
        let mu4 = e4 - 4.0 * mean * e3 + 6.0 * mean * mean * e2 - 3.0 * mean.powi(4);
        let p = 1.0 / n as f64;
        b.compare(
            "per_round_variance",
            var * count / (count - 1.0),
            k * p * (1.0 - p),
            Relation::Within(MEAN_SE),
            Some(((mu4 - var * var).max(0.0) / count).sqrt()),
        );
        let pairs: u64 = trials.iter().map(|r| r.lag_pairs).sum();
        if pairs >= 2 && var > 0.0 {
            let lag: f64 = trials.iter().map(|r| r.lag_products).sum::<f64>() / pairs as f64;
            b.compare(
                "lag1_autocorrelation",
                (lag - mean * mean) / var,
                0.0,
                Relation::Within(MEAN_SE),
                Some(1.0 / (pairs as f64).sqrt()),
            );
        }
    }
    let five_n = 5 * n as u64;
    if spec.rounds >= five_n {
        let emptied = trials.iter().filter(|r| r.all_emptied_by.is_some_and(|t| t <= five_n)).count() as u64;
        // A bin holding at most n balls that never empties in 5n rounds
        // received at least 4n of them.
        let bound = if trials.iter().all(|r| r.start_max as usize <= n) {
            Some((n as f64 * emptying_tail_bound(n as f64)?).min(1.0))
        } else {
            None
        };
        b.tail("some_bin_not_emptied_within_5n", spec.trials - emptied, spec.trials, bound)?;
        b.compare("all_bins_emptied_within_5n", emptied as f64, spec.trials as f64, Relation::AtLeast, None);
    }
    if spec.rounds > 0 {
        let exceed = trials.iter().filter(|r| r.max_load as f64 > threshold).count() as u64;
        let bound = between_empty_bound(spec.beta, spec.rounds, n as f64)?;
        b.tail("load_above_between_empty_threshold", exceed, spec.trials, Some(bound.min(1.0)))?;
        b.compare(
            "max_load_vs_between_empty_threshold",
            max_of(trials.iter().map(|r| r.max_load)),
            threshold,
            Relation::AtMost,
            None,
        );
    }
    Ok(b.finish())
}

struct CoupleTrial {
    uncoupled_rounds: u64,
    dominance_failures: u64,
    empty_event_failures: u64,
    original_max: u32,
    tetris_max: u32,
}

/// COUPLE: both processes on one stream; counts unmatched rounds and
/// dominance failures.
pub(super) fn couple(spec: &ExperimentSpec) -> Result<SummaryReport> {
    let n = spec.n;
    let trials = run_trials(spec.trials, |t| {
        let q0 = spec.initial_configuration(t)?;
        let c = coupled_run_with(&q0, spec.rounds, spec.seed, t, CoupledRunOptions { record: false })?;
        Ok(CoupleTrial {
            uncoupled_rounds: c.uncoupled_rounds,
            dominance_failures: c.dominance_failures,
            empty_event_failures: c.empty_event_failures,
            original_max: c.original_max,
            tetris_max: c.tetris_max,
        })
    })?;

    let mut b = Builder::new(spec);
    b.metric("original_max_load", trials.iter().map(|r| r.original_max as f64));
    b.metric("tetris_max_load", trials.iter().map(|r| r.tetris_max as f64));
    let observed_rounds = spec.trials * spec.rounds;
    b.tail(
        "uncoupled_round",
        trials.iter().map(|r| r.uncoupled_rounds).sum(),
        observed_rounds,
        None,
    )?;
    b.tail(
        "empty_bins_below_quarter",
        trials.iter().map(|r| r.empty_event_failures).sum(),
        observed_rounds,
        None,
    )?;
    let dominated = trials.iter().filter(|r| r.dominance_failures == 0).count() as u64;
    b.tail("dominance_failed", spec.trials - dominated, spec.trials, None)?;
    b.compare(
        "trials_fully_coupled",
        trials.iter().filter(|r| r.uncoupled_rounds == 0).count() as f64,
        spec.trials as f64,
        Relation::AtLeast,
        None,
    );
    b.compare("trials_with_dominance", dominated as f64, spec.trials as f64, Relation::AtLeast, None);
    b.compare(
        "original_max_minus_tetris_max",
        max_of(
            trials
                .iter()
                .filter(|r| r.dominance_failures == 0)
                .map(|r| r.original_max as f64 - r.tetris_max as f64),
        ),
        0.0,
        Relation::AtMost,
        None,
    );
    b.compare(
        "tetris_max_vs_between_empty_threshold",
        max_of(trials.iter().map(|r| r.tetris_max)),
        between_empty_threshold(spec.beta, n as f64)?,
        Relation::AtMost,
        None,
    );
    Ok(b.finish())
}

fn cover_trials(spec: &ExperimentSpec, with_faults: bool) -> Result<Vec<CoverReport>> {
    run_trials(spec.trials, |t| {
        let q0 = spec.initial_configuration(t)?;
        let faults = if with_faults { spec.faults.as_ref() } else { None };
        let mut r = cover_time_trial(&q0, spec.rounds, spec.seed, t, faults)?;
        // Per-ball cover rounds are summarised in the report; keep memory flat.
        r.per_ball = vec![r.per_ball.iter().flatten().max().copied()];
        Ok(r)
    })
}

/// COVER: parallel cover time under FIFO, optionally against a fault-free
/// baseline on the same seeds.
pub(super) fn cover(spec: &ExperimentSpec) -> Result<SummaryReport> {
    let n = spec.n;
    let trials = cover_trials(spec, true)?;
    let mut b = Builder::new(spec);
    let covered: Vec<f64> = trials.iter().filter_map(|r| r.parallel.map(|t| t as f64)).collect();
    b.metric("parallel_cover_time", covered.iter().copied());
    b.metric("max_load", trials.iter().map(|r| r.max_load as f64));
    b.metric("max_wait", trials.iter().map(|r| r.waiting_time_max as f64));
    b.metric("faults_injected", trials.iter().map(|r| r.faults_injected as f64));
    let not_covered = trials.iter().filter(|r| r.parallel.is_none()).count() as u64;
    b.tail("not_covered_within_horizon", not_covered, spec.trials, None)?;
    let worst = if not_covered > 0 { f64::INFINITY } else { max_of(covered.iter().copied()) };
    b.compare("parallel_cover_vs_envelope", worst, cover_time_envelope(n), Relation::AtMost, None);
    b.compare(
        "fifo_wait_violations",
        trials.iter().map(|r| r.fifo_violations).sum::<u64>() as f64,
        0.0,
        Relation::AtMost,
        None,
    );
    if spec.ball_count() == 1 {
        let s = MetricSummary::of(&covered);
        let exact = single_ball_cover_mean(n)?;
        b.exact("single_ball_cover_mean", &exact)?;
        b.compare(
            "single_ball_cover_vs_coupon_collector",
            s.mean,
            exact.to_f64().unwrap_or(f64::NAN),
            Relation::Within(COUPON_SE),
            Some(s.standard_error),
        );
    }
    if spec.faults.is_some() {
        let base = cover_trials(spec, false)?;
        let base_covered: Vec<f64> = base.iter().filter_map(|r| r.parallel.map(|t| t as f64)).collect();
        let base_summary = MetricSummary::of(&base_covered);
        b.metrics.insert("fault_free_parallel_cover_time".into(), base_summary.clone());
        let reference = if base_covered.len() == base.len() {
            3.0 * base_summary.mean
        } else {
            f64::NAN
        };
        b.compare("faulted_cover_vs_3x_fault_free", worst, reference, Relation::AtMost, None);
        b.compare(
            "fault_free_fifo_wait_violations",
            base.iter().map(|r| r.fifo_violations).sum::<u64>() as f64,
            0.0,
            Relation::AtMost,
            None,
        );
    }
    Ok(b.finish())
}

#[derive(Default)]
struct ExactCounts {
    x1_zero: u64,
    x2_zero: u64,
    both_zero: u64,
    configurations: BTreeMap<(u64, Vec<u32>), u64>,
}

/// EXACT_CHECK: oracle probabilities against simulated frequencies.
pub(super) fn exact_check(spec: &ExperimentSpec) -> Result<SummaryReport> {
    let n = spec.n;
    let horizon = spec.rounds.max(2);
    let q0 = spec.initial_configuration(0)?;
    let topology = spec.topology.build(n)?;
    let chunks = spec.trials.div_ceil(EXACT_CHUNK);
    let parts = run_trials(chunks, |c| {
        let mut counts = ExactCounts::default();
        let end = ((c + 1) * EXACT_CHUNK).min(spec.trials);
        for t in c * EXACT_CHUNK..end {
            let q = spec.initial_configuration(t)?;
            let mut p = Process::new(&q, topology.clone(), spec.strategy, Tracking::LoadsOnly, spec.seed, t)?;
            let mut zero = [false; 2];
            for r in 0..horizon {
                let before = p.loads()[0];
                p.step();
                if r < 2 {
                    zero[r as usize] = p.loads()[0] == before.saturating_sub(1);
                }
                *counts.configurations.entry((r + 1, p.loads().to_vec())).or_insert(0) += 1;
            }
            counts.x1_zero += zero[0] as u64;
            counts.x2_zero += zero[1] as u64;
            counts.both_zero += (zero[0] && zero[1]) as u64;
        }
        Ok(counts)
    })?;
    let mut total = ExactCounts::default();
    for part in parts {
        total.x1_zero += part.x1_zero;
        total.x2_zero += part.x2_zero;
        total.both_zero += part.both_zero;
        for (key, v) in part.configurations {
            *total.configurations.entry(key).or_insert(0) += v;
        }
    }

    let mut b = Builder::new(spec);
    let x1 = ArrivalEvent::new(1, 0, ArrivalPredicate::Eq(0));
    let x2 = ArrivalEvent::new(2, 0, ArrivalPredicate::Eq(0));
    let p1 = joint_event_probability(&q0, &[x1])?;
    let p2 = joint_event_probability(&q0, &[x2])?;
    let p12 = joint_event_probability(&q0, &[x1, x2])?;
    let product = &p1 * &p2;
    b.exact("p_x1_zero", &p1)?;
    b.exact("p_x2_zero", &p2)?;
    b.exact("p_x1_x2_zero", &p12)?;
    b.exact("p_x1_zero_times_p_x2_zero", &product)?;
    // Positive when the two arrival counts are not negatively associated.
    b.exact("p_x1_x2_zero_minus_product", &(&p12 - &product))?;
    let trials = spec.trials as f64;
    let against_exact = |b: &mut Builder, name: &str, hits: u64, p: &BigRational| {
        let p = p.to_f64().unwrap_or(f64::NAN);
        b.compare(
            name,
            hits as f64 / trials,
            p,
            Relation::Within(EXACT_SE),
            Some((p * (1.0 - p) / trials).sqrt()),
        );
    };
    against_exact(&mut b, "p_x1_zero", total.x1_zero, &p1);
    against_exact(&mut b, "p_x2_zero", total.x2_zero, &p2);
    against_exact(&mut b, "p_x1_x2_zero", total.both_zero, &p12);
    let mut d = ExactDistribution::point_mass(&q0)?;
    for round in 1..=horizon {
        d = d.evolve()?;
        for (loads, p) in d.support() {
            let hits = total.configurations.get(&(round, loads.to_vec())).copied().unwrap_or(0);
            against_exact(&mut b, &format!("round_{round}_configuration_{loads:?}"), hits, p);
        }
        let stray: u64 = total
            .configurations
            .iter()
            .filter(|((r, l), _)| *r == round && d.probability(l) == BigRational::from_integer(0.into()))
            .map(|(_, v)| v)
            .sum();
        b.compare(&format!("round_{round}_unreachable_hits"), stray as f64, 0.0, Relation::AtMost, None);
    }
    Ok(b.finish())
}

/// EMPTY_BINS: rounds with fewer than `n/4` empty bins once the initial
/// drain has reached legitimacy.
pub(super) fn empty_bins(spec: &ExperimentSpec) -> Result<SummaryReport> {
    let n = spec.n;
    let c = spec.threshold_c;
    let topology = spec.topology.build(n)?;
    let trials = run_trials(spec.trials, |t| {
        let q0: Configuration = spec.initial_configuration(t)?;
        let mut p = Process::new(&q0, topology.clone(), spec.strategy, Tracking::LoadsOnly, spec.seed, t)?;
        let mut converged = max_load_is_legitimate(q0.max_load(), n, c);
        let (mut observed, mut violations, mut min_empty) = (0u64, 0u64, usize::MAX);
        for _ in 0..spec.rounds {
            let s = p.step();
            converged |= max_load_is_legitimate(s.max_load, n, c);
            if converged {
                observed += 1;
                violations += (4 * s.empty < n) as u64;
                min_empty = min_empty.min(s.empty);
            }
        }
        Ok((observed, violations, min_empty))
    })?;
    let mut b = Builder::new(spec);
    b.metric(
        "min_empty_fraction",
        trials
            .iter()
            .filter(|r| r.0 > 0)
            .map(|r| r.2 as f64 / n as f64),
    );
    let observed: u64 = trials.iter().map(|r| r.0).sum();
    let violations: u64 = trials.iter().map(|r| r.1).sum();
    b.tail("empty_below_quarter", violations, observed, None)?;
    b.compare("empty_below_quarter_rounds", violations as f64, 0.0, Relation::AtMost, None);
    Ok(b.finish())
}
