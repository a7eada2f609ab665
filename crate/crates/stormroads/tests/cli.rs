//! Exercises the installed binary end to end: exit codes, the
//! simulate → validate → run loop, and stage-by-stage resumption.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stormroads"))
}

fn run_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_validate_run_loop() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("in");
    let out_dir = dir.path().join("out");

    let sim = bin()
        .args(["simulate", "--seed", "7", "--n-posts", "80"])
        .arg("--out-dir")
        .arg(&bundle)
        .output()
        .unwrap();
    run_ok(&sim, "simulate");
    assert!(bundle.join("posts.ndjson").exists());
    assert!(bundle.join("config.conf").exists());

    let config = bundle.join("config.conf");
    let validate = bin()
        .arg("validate")
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    run_ok(&validate, "validate");
    assert!(String::from_utf8_lossy(&validate.stdout).contains("config ok"));

    let run = bin()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&run, "run");
    assert!(out_dir.join("manifest.json").exists());
    assert!(out_dir.join("07_edges_metrics.geojson").exists());

    // Resume from the join stage against the existing artifacts.
    let resume = bin()
        .args(["run", "--from", "join"])
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&resume, "run --from join");

    // A stage subcommand alone reruns just that stage.
    let stage = bin()
        .arg("centrality")
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&stage, "centrality");

    let grid = bin()
        .args(["plan-grid", "--radius-miles", "2", "--spacing-miles", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    run_ok(&grid, "plan-grid");
    assert!(out_dir.join("grid_centers.csv").exists());
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

#[test]
fn config_problems_exit_2_and_data_problems_exit_1() {
    let dir = tempfile::tempdir().unwrap();

    // Missing input files: a config error.
    let validate = bin().arg("validate").output().unwrap();
    assert_eq!(exit_code(&validate), 2);
    assert!(String::from_utf8_lossy(&validate.stdout).contains("posts"));

    // Unknown stage name: a config error.
    let bad_stage = bin().args(["run", "--from", "nowhere"]).output().unwrap();
    assert_eq!(exit_code(&bad_stage), 2);

    // Well-formed config pointing at malformed data: a data error.
    let bundle = dir.path().join("in");
    let sim = bin()
        .args(["simulate", "--seed", "3", "--n-posts", "10"])
        .arg("--out-dir")
        .arg(&bundle)
        .output()
        .unwrap();
    run_ok(&sim, "simulate");
    let nodes = std::fs::read_to_string(bundle.join("nodes.csv")).unwrap();
    let mut lines: Vec<&str> = nodes.lines().collect();
    lines.remove(1); // drop a node the edge list still references
    std::fs::write(bundle.join("nodes.csv"), lines.join("\n")).unwrap();
    let run = bin()
        .arg("run")
        .arg("--config")
        .arg(bundle.join("config.conf"))
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&run), 1);
    assert!(String::from_utf8_lossy(&run.stderr).contains("error:"));
}

#[test]
fn overrides_beat_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("in");
    let sim = bin()
        .args(["simulate", "--seed", "5", "--n-posts", "40"])
        .arg("--out-dir")
        .arg(&bundle)
        .output()
        .unwrap();
    run_ok(&sim, "simulate");

    // Shrink the window so every post is dropped; the run must still
    // complete with schema-valid empty layers.
    let run = bin()
        .args([
            "run",
            "--window-start",
            "2019-01-01T00:00:00Z",
            "--window-end",
            "2019-01-02T00:00:00Z",
        ])
        .arg("--config")
        .arg(bundle.join("config.conf"))
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    run_ok(&run, "run with narrowed window");
    let scored = std::fs::read_to_string(dir.path().join("out").join("03_scored.csv")).unwrap();
    assert_eq!(
        scored.lines().count(),
        1,
        "expected a header-only scored table"
    );
    check_manifest_window(&dir.path().join("out"));
}

fn check_manifest_window(out: &Path) {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(
        manifest["parameters"]["window_start"],
        "2019-01-01T00:00:00Z"
    );
}
