mod args;
mod output;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;

use args::{build_spec, BoundsFlags, Cli, Command, Flags};
use output::{data_files, ensure_dir, trajectory_csv, write_json, Manifest, TrajectoryKind, MANIFEST, SUMMARY};
use rbb_core::bounds;
use rbb_core::harness::{run_experiment, ExperimentKind, ExperimentSpec};
use rbb_core::metrics::{FaultKind, FaultSchedule};
use rbb_core::Error;

/// Failure classes mapped to exit codes 1 and 2.
enum Failure {
    Validation(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    let (name, kind, flags, kind_flag, trajectory): (_, _, Flags, Option<String>, _) = match command {
        Command::Bounds(b) => return bounds_command(&b),
        Command::Simulate(f) => ("simulate", Some(ExperimentKind::Stability), f, None, Some(TrajectoryKind::Original)),
        Command::Tetris(f) => ("tetris", Some(ExperimentKind::Tetris), f, None, Some(TrajectoryKind::Tetris)),
        Command::Couple(f) => ("couple", Some(ExperimentKind::Couple), f, None, Some(TrajectoryKind::Coupled)),
        Command::Exact(f) => ("exact", Some(ExperimentKind::ExactCheck), f, None, None),
        Command::Cover(f) => ("cover", Some(ExperimentKind::Cover), f, None, None),
        Command::Stabilize(f) => ("stabilize", Some(ExperimentKind::Stabilize), f, None, None),
        Command::Adversary(f) => ("adversary", Some(ExperimentKind::Cover), f, None, None),
        Command::Suite(s) => ("suite", None, s.flags, s.kind, None),
    };
    let adversary = name == "adversary";
    let spec = build_spec(kind, &flags, kind_flag.as_ref(), |s| apply_defaults(s, adversary))?;
    spec.validate()?;
    if adversary && spec.faults.is_none() {
        return Err(Failure::Validation("adversary needs a fault schedule".into()));
    }
    run(name, &spec, trajectory, flags.out.as_deref())
}

fn ceil(x: f64) -> u64 {
    x.ceil() as u64
}

/// Subcommand defaults for fields left unset by both file and flags.
fn apply_defaults(spec: &mut ExperimentSpec, adversary: bool) {
    let n = spec.n;
    spec.rounds = match spec.kind {
        ExperimentKind::Stabilize => 6 * n as u64,
        ExperimentKind::Cover => ceil(4.0 * bounds::cover_time_envelope(n.max(2))),
        ExperimentKind::ExactCheck => 3,
        ExperimentKind::Tetris => 5 * n as u64,
        _ => 1000,
    };
    if spec.kind == ExperimentKind::ExactCheck {
        spec.trials = 100_000;
    }
    if adversary {
        spec.faults = Some(FaultSchedule {
            period: (8 * n as u64).max(1),
            kind: FaultKind::AllInOne { target: 0 },
        });
    }
}

fn run(name: &str, spec: &ExperimentSpec, trajectory: Option<TrajectoryKind>, out: Option<&Path>) -> Result<(), Failure> {
    let Some(dir) = out else {
        let report = run_experiment(spec).map_err(internal)?;
        println!("{}", serde_json::to_string_pretty(&report).map_err(internal)?);
        return Ok(());
    };
    let dir = ensure_dir(dir).map_err(|e| Failure::Validation(format!("cannot write to {}: {e}", dir.display())))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name,
        seed: spec.seed,
        spec,
        trajectory,
        files: data_files(spec, trajectory),
    };
    write_json(&dir.join(MANIFEST), &manifest).map_err(internal)?;
    if let Some(kind) = trajectory {
        for t in 0..spec.trials {
            let csv = trajectory_csv(spec, kind, t).map_err(internal)?;
            std::fs::write(dir.join(output::trajectory_file(spec.trials, t)), csv).map_err(internal)?;
        }
    }
    let report = run_experiment(spec).map_err(internal)?;
    write_json(&dir.join(SUMMARY), &report).map_err(internal)?;
    Ok(())
}

#[derive(Serialize)]
struct BoundsReport {
    n: usize,
    beta: f64,
    threshold_c: f64,
    values: BTreeMap<&'static str, f64>,
}

fn bounds_command(b: &BoundsFlags) -> Result<(), Failure> {
    let n = b.n.ok_or_else(|| Failure::Validation("--n is required".into()))?;
    if n < 2 {
        return Err(Failure::Validation(format!("n must be at least 2, got {n}")));
    }
    let nf = n as f64;
    let beta = b.beta.unwrap_or(2.0);
    let c = b.threshold_c.unwrap_or(rbb_core::metrics::DEFAULT_THRESHOLD_C);
    let mut values = BTreeMap::new();
    values.insert("legitimacy_threshold", bounds::legitimacy_threshold(c, n));
    values.insert("between_empty_threshold", bounds::between_empty_threshold(beta, nf)?);
    values.insert("emptying_tail_bound", bounds::emptying_tail_bound(nf)?);
    values.insert("cover_time_envelope", bounds::cover_time_envelope(n));
    if let Some(w) = b.window {
        values.insert("between_empty_bound", bounds::between_empty_bound(beta, w, nf)?);
        values.insert("tetris_window_mean", bounds::tetris_window_mean(w.saturating_sub(1)));
    }
    match (b.delta, b.mu) {
        (Some(d), Some(mu)) => {
            values.insert("chernoff_lower", bounds::chernoff_lower(mu, d)?);
            values.insert("chernoff_upper", bounds::chernoff_upper(mu, d)?);
        }
        (None, None) => {}
        _ => return Err(Failure::Validation("--delta and --mu go together".into())),
    }
    let report = BoundsReport {
        n,
        beta,
        threshold_c: c,
        values,
    };
    match &b.out {
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(internal)?),
        Some(dir) => {
            let dir =
                ensure_dir(dir).map_err(|e| Failure::Validation(format!("cannot write to {}: {e}", dir.display())))?;
            write_json(&dir.join(SUMMARY), &report).map_err(internal)?;
        }
    }
    Ok(())
}
