use std::path::Path;
use std::process::Command;

use entrosc_cli::snapshot::{decode_header, load_snapshot};
use entrosc_core::dynamics::random_initial_state;
use entrosc_core::entropy::entropy_scan;
use entrosc_core::field::Grid;

fn entrosc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_entrosc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "
[grid]
n = 256

[analysis]
ensemble_size = 4
burn_in = 1.0
lengths = [5.0, 10.0]
eps_list = [0.2, 0.1]
";

#[test]
fn simulate_without_burn_in_stores_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nn = 128\n[analysis]\nensemble_size = 1\nburn_in = 0.0\nseed = 9\n",
    );
    let out = dir.path().join("out");
    let run = entrosc(&["simulate", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let bytes = std::fs::read(out.join("ensemble.bin")).unwrap();
    assert_eq!(decode_header(&bytes).unwrap().count, 1);
    let ens = load_snapshot(&out.join("ensemble.bin")).unwrap();
    let grid = Grid::new(-40.0, 40.0, 128).unwrap();
    assert_eq!(ens.members[0], random_initial_state(&grid, 9, 0));
    assert_eq!(ens.seed, 9);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = entrosc(&["simulate", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
        assert!(status.status.success());
        outputs.push((
            std::fs::read(out.join("ensemble.bin")).unwrap(),
            std::fs::read(out.join("simulate.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn = 128\n[analysis]\nensemble_size = 1\nburn_in = 0.0\n");
    let out = dir.path().join("out");
    let run = entrosc(&["simulate", "--config", &cfg, "--seed", "77", "--out-dir", out.to_str().unwrap()]);
    assert!(run.status.success());
    assert_eq!(load_snapshot(&out.join("ensemble.bin")).unwrap().seed, 77);
}

#[test]
fn entropy_report_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let sim = dir.path().join("sim");
    assert!(entrosc(&["simulate", "--config", &cfg, "--out-dir", sim.to_str().unwrap()])
        .status
        .success());
    let snapshot = sim.join("ensemble.bin");
    let cfg = write_config(
        dir.path(),
        &format!(
            "{SMALL}\n[io]\nformat = \"json\"\nsnapshot = \"{}\"\n",
            snapshot.display()
        ),
    );
    let out = dir.path().join("entropy");
    let run = entrosc(&["entropy", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("entropy.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    let expected = entropy_scan(&load_snapshot(&snapshot).unwrap(), &[0.2, 0.1], &[5.0, 10.0]).unwrap();
    let flat: Vec<(f64, f64, u64)> = expected
        .iter()
        .flat_map(|e| {
            e.lengths
                .iter()
                .zip(&e.counts)
                .map(move |(l, c)| (e.eps, *l, *c as u64))
        })
        .collect();
    assert_eq!(rows.len(), flat.len());
    for (row, (eps, l, count)) in rows.iter().zip(flat) {
        assert_eq!(row["eps"].as_f64().unwrap(), eps);
        assert_eq!(row["L"].as_f64().unwrap(), l);
        assert_eq!(row["count"].as_u64().unwrap(), count);
    }
}

#[test]
fn invalid_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\neta = 0.5\n[analysis]\ndelta = 0.1\n");
    let run = entrosc(&["simulate", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("model.eta"), "{stderr}");
    assert!(stderr.contains("analysis.delta"), "{stderr}");
    assert!(!dir.path().join("ensemble.bin").exists());
}
