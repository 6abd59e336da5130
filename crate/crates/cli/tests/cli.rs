use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn monfer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monfer")).args(args).env_remove("MONFER_WORKERS").output().unwrap()
}

fn write_plan(dir: &Path, body: &str) -> String {
    let path = dir.join("plan.toml");
    let out = dir.join("out");
    fs::write(&path, format!("output_dir = {:?}\n{body}", out.display().to_string())).unwrap();
    path.display().to_string()
}

const SCAN_PLAN: &str = "master_seed = 4\ntrajectories_per_point = 3\nbackend = \"dense\"\n\
    [grid]\nsizes = [4, 6]\ninteractions = [1.0]\ngammas = [0.2, 2.0]\n[time]\nn_steps = 40\nsampling_interval = 0.5\n";

#[test]
fn run_scan_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), SCAN_PLAN);
    let out = monfer(&["run", &plan]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("out");
    for f in ["aggregates.csv", "summary.json", "plan.toml"] {
        assert!(results.join(f).exists(), "{f}");
    }
    let results = results.display().to_string();

    let out = monfer(&["scan", &results]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("L=4 vs L=6"), "{stdout}");
    assert!(dir.path().join("out/scan.json").exists());

    let out = monfer(&["fit", &results]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success());
    assert_eq!(stdout.lines().count(), 5, "{stdout}");
}

#[test]
fn worker_count_from_environment_does_not_change_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = write_plan(a.path(), SCAN_PLAN);
    let pb = write_plan(b.path(), SCAN_PLAN);
    assert!(monfer(&["run", &pa]).status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_monfer")).args(["run", &pb]).env("MONFER_WORKERS", "3").output().unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(a.path().join("out/aggregates.csv")).unwrap(), fs::read(b.path().join("out/aggregates.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), "[grid]\nsizes = [6]\ngamas = [0.5]\n");
    let out = monfer(&["run", &plan]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamas"));

    let plan = write_plan(dir.path(), "backend = \"gaussian\"\n[grid]\nsizes = [6]\ngammas = [0.5]\nobservables = [\"current\"]\n");
    assert_eq!(monfer(&["run", &plan]).status.code(), Some(2));
    assert_eq!(monfer(&["run", "/nonexistent/plan.toml"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(
        dir.path(),
        "trajectories_per_point = 2\nbackend = \"mps\"\n[grid]\nsizes = [6]\ninteractions = [1.0]\ngammas = [0.1]\n\
         [time]\nn_steps = 20\n[truncation]\nchi_max = 1\nsvd_cutoff = 0.0\nhard_limit = 1e-12\n",
    );
    assert_eq!(monfer(&["run", &plan]).status.code(), Some(3));

    let plan = write_plan(dir.path(), "trajectories_per_point = 2\n[grid]\nsizes = [4]\ngammas = [0.5]\n[time]\nn_steps = 10\n");
    assert!(monfer(&["run", &plan]).status.success());
    let out = monfer(&["scan", &dir.path().join("out").display().to_string()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("crossing undetermined"));
}

#[test]
fn validate_suite_passes() {
    let out = monfer(&["validate", "--trajectories", "1"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
}
