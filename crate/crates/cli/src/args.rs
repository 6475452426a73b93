use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use rbb_core::harness::{ExperimentKind, ExperimentSpec, StartKind};
use rbb_core::metrics::{FaultKind, FaultSchedule};
use rbb_core::{Error, Strategy, TopologySpec};

#[derive(Debug, Parser)]
#[command(name = "rbb", version, about = "Repeated balls-into-bins experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the original process and record its trajectory.
    Simulate(Flags),
    /// Run the Tetris process.
    Tetris(Flags),
    /// Run the original and Tetris processes coupled on one stream.
    Couple(Flags),
    /// Exact arrival probabilities on a tiny instance, checked by simulation.
    Exact(Flags),
    /// Parallel cover time under FIFO.
    Cover(Flags),
    /// Convergence time to a legitimate configuration.
    Stabilize(Flags),
    /// Cover time under a periodic adversary, against a fault-free baseline.
    Adversary(Flags),
    /// Evaluate the analytic bounds.
    Bounds(BoundsFlags),
    /// Run any experiment kind.
    Suite(SuiteFlags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub balls: Option<u64>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// fifo, lifo or random.
    #[arg(long)]
    pub strategy: Option<String>,
    /// complete, ring or regular:<d>[:<seed>].
    #[arg(long)]
    pub topology: Option<String>,
    #[arg(long)]
    pub threshold_c: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub fault_period: Option<u64>,
    /// all-in-one[:<bin>] or permute.
    #[arg(long)]
    pub fault_kind: Option<String>,
    /// flat, all-in-one, random or a comma-separated load vector.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Output directory; the summary goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Spec file; flags override its values.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SuiteFlags {
    /// Experiment kind, e.g. STABILITY; may come from the spec file instead.
    #[arg(long)]
    pub kind: Option<String>,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsFlags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub threshold_c: Option<f64>,
    /// Chernoff deviation.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Chernoff expectation bound.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Window length for the between-empty bound.
    #[arg(long)]
    pub window: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Spec file contents: the flag names, snake_case, all optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub balls: Option<u64>,
    pub rounds: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub strategy: Option<String>,
    pub topology: Option<String>,
    pub threshold_c: Option<f64>,
    pub beta: Option<f64>,
    pub fault_period: Option<u64>,
    pub fault_kind: Option<String>,
    pub start: Option<String>,
    pub confidence: Option<f64>,
}

impl SpecFile {
    pub fn read(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(v: Option<&String>) -> Result<Option<T>, Error> {
    v.map(|s| s.parse()).transpose()
}

/// Merges file values and flags into a spec. `defaults` fills what neither
/// provides once `n` is known.
pub fn build_spec(
    kind: Option<ExperimentKind>,
    flags: &Flags,
    kind_flag: Option<&String>,
    defaults: impl Fn(&mut ExperimentSpec),
) -> Result<ExperimentSpec, Error> {
    let file = match &flags.spec {
        Some(p) => SpecFile::read(p)?,
        None => SpecFile::default(),
    };
    let kind = match kind {
        Some(k) => k,
        None => parse(kind_flag.or(file.kind.as_ref()))?
            .ok_or_else(|| Error::InvalidSpec("no experiment kind given (use --kind or a spec file)".into()))?,
    };
    let n = flags
        .n
        .or(file.n)
        .ok_or_else(|| Error::InvalidSpec("--n is required".into()))?;
    let mut spec = ExperimentSpec::new(kind, n);
    defaults(&mut spec);
    macro_rules! pick {
        ($field:ident) => {
            flags.$field.or(file.$field)
        };
    }
    macro_rules! pick_str {
        ($field:ident) => {
            flags.$field.as_ref().or(file.$field.as_ref())
        };
    }
    if let Some(m) = pick!(balls) {
        spec.balls = Some(m);
    }
    if let Some(t) = pick!(rounds) {
        spec.rounds = t;
    }
    if let Some(t) = pick!(trials) {
        spec.trials = t;
    }
    if let Some(s) = pick!(seed) {
        spec.seed = s;
    }
    if let Some(c) = pick!(threshold_c) {
        spec.threshold_c = c;
    }
    if let Some(b) = pick!(beta) {
        spec.beta = b;
    }
    if let Some(c) = pick!(confidence) {
        spec.confidence = c;
    }
    if let Some(s) = parse::<Strategy>(pick_str!(strategy))? {
        spec.strategy = s;
    }
    if let Some(t) = parse::<TopologySpec>(pick_str!(topology))? {
        spec.topology = t;
    }
    if let Some(s) = parse::<StartKind>(pick_str!(start))? {
        spec.start = Some(s);
    }
    let period = pick!(fault_period);
    let fault_kind = parse::<FaultKind>(pick_str!(fault_kind))?;
    match (period, fault_kind, spec.faults.take()) {
        (None, None, existing) => spec.faults = existing,
        (Some(p), k, existing) => {
            let k = k.or(existing.map(|f| f.kind)).unwrap_or(FaultKind::AllInOne { target: 0 });
            spec.faults = Some(FaultSchedule::new(p, k)?);
        }
        (None, Some(k), Some(existing)) => spec.faults = Some(FaultSchedule::new(existing.period, k)?),
        (None, Some(_), None) => return Err(Error::InvalidSpec("--fault-kind needs --fault-period".into())),
    }
    Ok(spec)
}
