use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::stats::{wilson_interval, FitReport, MetricSummary};
use super::{ExperimentKind, ExperimentSpec};
use crate::error::{Error, Result};

/// Exact rational, serialised as `{"num": .., "den": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExactRational {
    pub num: i64,
    pub den: i64,
}

impl ExactRational {
    pub fn new(num: i64, den: i64) -> Self {
        Self { num, den }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl TryFrom<&BigRational> for ExactRational {
    type Error = Error;

    fn try_from(r: &BigRational) -> Result<Self> {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(num), Some(den)) => Ok(Self { num, den }),
            _ => Err(Error::Precondition(format!("{r} does not fit in 64-bit integers"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `empirical <= reference`.
    AtMost,
    /// `empirical >= reference`.
    AtLeast,
    /// `empirical > reference`.
    GreaterThan,
    /// `|empirical - reference| <= k · standard_error`.
    Within(f64),
}

/// An empirical quantity paired with an analytic or exact reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub name: String,
    pub empirical: f64,
    pub reference: f64,
    pub relation: Relation,
    pub standard_error: Option<f64>,
    pub holds: bool,
}

impl Comparison {
    pub fn new(name: impl Into<String>, empirical: f64, reference: f64, relation: Relation, se: Option<f64>) -> Self {
        let holds = match relation {
            Relation::AtMost => empirical <= reference,
            Relation::AtLeast => empirical >= reference,
            Relation::GreaterThan => empirical > reference,
            Relation::Within(k) => se.is_some_and(|s| (empirical - reference).abs() <= k * s),
        };
        Self {
            name: name.into(),
            empirical,
            reference,
            relation,
            standard_error: se,
            holds,
        }
    }

    /// Distance from the reference in standard errors.
    pub fn z_score(&self) -> Option<f64> {
        self.standard_error.map(|s| (self.empirical - self.reference) / s)
    }
}

/// Empirical frequency of a tail event with its Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFrequency {
    pub name: String,
    pub events: u64,
    pub trials: u64,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Analytic upper bound on the event probability, where one applies.
    pub bound: Option<f64>,
    /// The interval does not lie entirely above the bound.
    pub consistent: Option<bool>,
}

impl TailFrequency {
    pub fn new(name: impl Into<String>, events: u64, trials: u64, confidence: f64, bound: Option<f64>) -> Result<Self> {
        let (ci_low, ci_high) = wilson_interval(events, trials, confidence)?;
        Ok(Self {
            name: name.into(),
            events,
            trials,
            frequency: events as f64 / trials as f64,
            ci_low,
            ci_high,
            bound,
            consistent: bound.map(|b| ci_low <= b),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub kind: ExperimentKind,
    pub spec: ExperimentSpec,
    pub trials: u64,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub tails: Vec<TailFrequency>,
    pub comparisons: Vec<Comparison>,
    pub exact: BTreeMap<String, ExactRational>,
    pub fits: Vec<FitReport>,
}

impl SummaryReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.get(name)
    }

    pub fn comparison(&self, name: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.name == name)
    }

    pub fn tail(&self, name: &str) -> Option<&TailFrequency> {
        self.tails.iter().find(|t| t.name == name)
    }

    /// Every comparison holds and every bounded tail is consistent.
    pub fn all_hold(&self) -> bool {
        self.comparisons.iter().all(|c| c.holds) && self.tails.iter().all(|t| t.consistent != Some(false))
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .comparisons
            .iter()
            .filter(|c| !c.holds)
            .map(|c| format!("{}: empirical {} vs reference {} ({:?})", c.name, c.empirical, c.reference, c.relation))
            .collect();
        out.extend(
            self.tails
                .iter()
                .filter(|t| t.consistent == Some(false))
                .map(|t| format!("{}: interval [{}, {}] above bound {:?}", t.name, t.ci_low, t.ci_high, t.bound)),
        );
        out
    }
}
