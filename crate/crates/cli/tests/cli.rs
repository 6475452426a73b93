use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rbb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbb"))
        .args(args)
        .env("RBB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn rational(v: &Value) -> (i64, i64) {
    (v["num"].as_i64().unwrap(), v["den"].as_i64().unwrap())
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = rbb(&["simulate", "--n", "16", "--rounds", "10", "--seed", "1", "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["trajectory.csv", "summary.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "round,max_load,empty_bins,overloaded_bins,tetris_max_load,coupled_flag,dominance_flag"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0], "0,1,0,0,,,");
    assert!(csv.ends_with('\n') && csv.is_ascii());
    for r in rows {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols.len(), 7);
        let (empty, over): (u32, u32) = (cols[2].parse().unwrap(), cols[3].parse().unwrap());
        assert!(over <= empty);
    }
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    rbb(&["simulate", "--n", "32", "--rounds", "50", "--seed", "1", "--out", a.to_str().unwrap()]);
    rbb(&["simulate", "--n", "32", "--rounds", "50", "--seed", "2", "--out", b.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
}

#[test]
fn manifest_describes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("out");
    let out = rbb(&["simulate", "--n", "8", "--rounds", "5", "--trials", "2", "--seed", "9", "--out", d.to_str().unwrap()]);
    assert!(out.status.success());
    let m = json(&d.join("manifest.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["spec"]["n"], 8);
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert_eq!(files, ["trajectory_0.csv", "trajectory_1.csv", "summary.json"]);
    for f in files {
        assert!(d.join(f).exists(), "{f}");
    }
}

#[test]
fn exact_reports_counterexample_rationals() {
    let out = rbb(&["exact", "--n", "2", "--trials", "20000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rational(&v["exact"]["p_x1_x2_zero"]), (1, 8));
    assert_eq!(rational(&v["exact"]["p_x1_zero"]), (1, 4));
    assert_eq!(rational(&v["exact"]["p_x2_zero"]), (3, 8));
    assert_eq!(rational(&v["exact"]["p_x1_zero_times_p_x2_zero"]), (3, 32));
    assert_eq!(rational(&v["exact"]["p_x1_x2_zero_minus_product"]), (1, 32));
}

#[test]
fn couple_rejects_n_not_divisible_by_four() {
    let out = rbb(&["couple", "--n", "10", "--rounds", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn couple_rejects_ring() {
    let out = rbb(&["couple", "--n", "16", "--topology", "ring"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_a_validation_error() {
    assert_eq!(rbb(&["simulate", "--n", "8", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(rbb(&["teleport"]).status.code(), Some(1));
    assert_eq!(rbb(&["simulate"]).status.code(), Some(1));
    assert_eq!(rbb(&["simulate", "--n", "8", "--strategy", "sideways"]).status.code(), Some(1));
    assert_eq!(rbb(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let target = file.join("sub");
    let out = rbb(&["simulate", "--n", "8", "--rounds", "2", "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn spec_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("run.toml");
    fs::write(&spec, "kind = \"STABILITY\"\nn = 32\nrounds = 20\ntrials = 2\nseed = 4\nstart = \"all-in-one\"\n").unwrap();
    let d = dir.path().join("out");
    let out = rbb(&["suite", "--spec", spec.to_str().unwrap(), "--n", "16", "--out", d.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&d.join("summary.json"));
    assert_eq!(s["kind"], "STABILITY");
    assert_eq!(s["spec"]["n"], 16);
    assert_eq!(s["spec"]["rounds"], 20);
    assert_eq!(s["metrics"]["max_load"]["max"], 16.0);

    fs::write(&spec, "n = 32\nwhatever = 1\n").unwrap();
    let out = rbb(&["suite", "--kind", "STABILITY", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn couple_writes_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("c");
    let out = rbb(&["couple", "--n", "64", "--rounds", "30", "--seed", "3", "--out", d.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.join("trajectory.csv")).unwrap();
    for r in csv.lines().skip(1) {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols[5], "1");
        assert_eq!(cols[6], "1");
        assert!(cols[1].parse::<u32>().unwrap() <= cols[4].parse::<u32>().unwrap());
    }
    let s = json(&d.join("summary.json"));
    assert_eq!(s["kind"], "COUPLE");
}

#[test]
fn other_subcommands_run() {
    for args in [
        &["tetris", "--n", "32", "--rounds", "200"][..],
        &["cover", "--n", "8", "--trials", "3"],
        &["stabilize", "--n", "64", "--trials", "2"],
        &["adversary", "--n", "16", "--trials", "2"],
        &["bounds", "--n", "1024", "--beta", "2"],
        &["suite", "--kind", "EMPTY_BINS", "--n", "32", "--rounds", "100"],
        &["simulate", "--n", "30", "--topology", "regular:4:1", "--rounds", "50"],
    ] {
        let out = rbb(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let _: Value = serde_json::from_slice(&out.stdout).unwrap();
    }
}

#[test]
fn adversary_records_baseline() {
    let out = rbb(&["adversary", "--n", "16", "--trials", "2", "--fault-period", "64", "--fault-kind", "permute"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["spec"]["faults"]["period"], 64);
    assert_eq!(v["spec"]["faults"]["kind"]["kind"], "permute");
    assert!(v["metrics"]["fault_free_parallel_cover_time"].is_object());
}
