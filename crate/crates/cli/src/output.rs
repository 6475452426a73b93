//! Manifest, trajectory CSV and summary JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rbb_core::coupling::{coupled_run_with, CoupledRunOptions};
use rbb_core::harness::ExperimentSpec;
use rbb_core::rng::{self, Purpose};
use rbb_core::tetris::TetrisState;
use rbb_core::{LoadStats, Process, Result, Tracking};

pub const CSV_HEADER: &str = "round,max_load,empty_bins,overloaded_bins,tetris_max_load,coupled_flag,dominance_flag\n";
pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

/// Which trajectory, if any, a subcommand records per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Original,
    Tetris,
    Coupled,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub seed: u64,
    pub spec: &'a ExperimentSpec,
    pub trajectory: Option<TrajectoryKind>,
    pub files: Vec<String>,
}

pub fn trajectory_file(trials: u64, trial: u64) -> String {
    if trials == 1 {
        "trajectory.csv".to_string()
    } else {
        format!("trajectory_{trial}.csv")
    }
}

pub fn data_files(spec: &ExperimentSpec, trajectory: Option<TrajectoryKind>) -> Vec<String> {
    let mut files: Vec<String> = match trajectory {
        Some(_) => (0..spec.trials).map(|t| trajectory_file(spec.trials, t)).collect(),
        None => Vec::new(),
    };
    files.push(SUMMARY.to_string());
    files
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

fn row(out: &mut String, round: u64, original: Option<LoadStats>, tetris: Option<u32>, flags: Option<(bool, bool)>) {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let _ = writeln!(
        out,
        "{round},{},{},{},{},{},{}",
        opt(original.map(|s| s.max_load.to_string())),
        opt(original.map(|s| s.empty.to_string())),
        opt(original.map(|s| s.overloaded.to_string())),
        opt(tetris.map(|m| m.to_string())),
        opt(flags.map(|f| (f.0 as u8).to_string())),
        opt(flags.map(|f| (f.1 as u8).to_string())),
    );
}

/// CSV text of one trial's trajectory, on the same streams the harness uses.
pub fn trajectory_csv(spec: &ExperimentSpec, kind: TrajectoryKind, trial: u64) -> Result<String> {
    let q0 = spec.initial_configuration(trial)?;
    let mut out = String::from(CSV_HEADER);
    match kind {
        TrajectoryKind::Original => {
            let topology = spec.topology.build(spec.n)?;
            let mut p = Process::new(&q0, topology, spec.strategy, Tracking::LoadsOnly, spec.seed, trial)?;
            row(&mut out, 0, Some(p.stats()), None, None);
            for _ in 0..spec.rounds {
                let s = p.step();
                row(&mut out, p.round(), Some(s), None, None);
            }
        }
        TrajectoryKind::Tetris => {
            // Tetris load counts go in the load columns; tetris_max_load
            // repeats the maximum.
            let mut s = TetrisState::from_configuration(&q0)?;
            let mut r = rng::stream(spec.seed, trial, Purpose::Tetris);
            row(&mut out, 0, Some(s.stats()), Some(s.max_load()), None);
            for _ in 0..spec.rounds {
                s.step(&mut r);
                row(&mut out, s.round(), Some(s.stats()), Some(s.max_load()), None);
            }
        }
        TrajectoryKind::Coupled => {
            let c = coupled_run_with(&q0, spec.rounds, spec.seed, trial, CoupledRunOptions { record: true })?;
            for r in &c.records {
                let s = LoadStats {
                    max_load: r.original.max_load,
                    empty: r.original.empty,
                    singleton: 0,
                    overloaded: r.original.overloaded,
                };
                row(
                    &mut out,
                    r.round,
                    Some(s),
                    Some(r.tetris_max_load),
                    Some((r.flags.coupled, r.flags.dominance)),
                );
            }
        }
    }
    Ok(out)
}

pub fn ensure_dir(dir: &Path) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".rbb-write-check");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(dir.to_path_buf())
}
