use std::fs;
use std::path::Path;

use monitored_fermions::experiment::{
    emit_outputs, load_summary, run_ensemble, run_point_trajectory, write_csv, ExperimentPlan, PointAggregate, RunOptions,
    Summary, TrajectoryLine, CSV_HEADER, TRAJECTORY_FILE,
};
use monitored_fermions::{BackendKind, Error};

fn plan(dir: &Path, trajectories: usize) -> ExperimentPlan {
    let text = format!(
        "master_seed = 11\ntrajectories_per_point = {trajectories}\nbackend = \"dense\"\noutput_dir = {:?}\n\
         [grid]\nsizes = [4, 5]\ninteractions = [1.0]\ngammas = [0.3]\nobservables = [\"occupation\", \"current\"]\n\
         [time]\nn_steps = 40\nsampling_interval = 0.25\n",
        dir.display().to_string()
    );
    ExperimentPlan::from_toml(&text).unwrap()
}

fn csv_bytes(aggs: &[PointAggregate]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(aggs, &mut out).unwrap();
    out
}

#[test]
fn same_seed_gives_identical_csv_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = plan(a.path(), 5);
    let pb = plan(b.path(), 5);
    let ra = run_ensemble(&pa, &RunOptions { workers: 1, resume: false }).unwrap();
    let rb = run_ensemble(&pb, &RunOptions { workers: 3, resume: false }).unwrap();
    emit_outputs(&ra, &pa, a.path()).unwrap();
    emit_outputs(&rb, &pb, b.path()).unwrap();
    assert_eq!(fs::read(a.path().join("aggregates.csv")).unwrap(), fs::read(b.path().join("aggregates.csv")).unwrap());
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let full = run_ensemble(&plan(a.path(), 6), &RunOptions::default()).unwrap();

    run_ensemble(&plan(b.path(), 3), &RunOptions::default()).unwrap();
    // simulate a crash mid-write on one point
    let first = plan(b.path(), 6).points()[0];
    let file = monitored_fermions::experiment::point_dir(b.path(), &first).join(TRAJECTORY_FILE);
    let mut text = fs::read_to_string(&file).unwrap();
    text.push_str("{\"index\":3,\"la");
    fs::write(&file, text).unwrap();

    let resumed = run_ensemble(&plan(b.path(), 6), &RunOptions::default()).unwrap();
    assert_eq!(resumed, full);
    assert_eq!(csv_bytes(&resumed), csv_bytes(&full));
    let lines = fs::read_to_string(&file).unwrap();
    assert_eq!(lines.lines().count(), 6);
}

#[test]
fn merge_of_parts_equals_whole() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(dir.path(), 1);
    let point = p.points()[1];
    let lines: Vec<TrajectoryLine> = (0..7)
        .map(|index| TrajectoryLine { index, late: Some(run_point_trajectory(&p, &point, 1, index).unwrap()), error: None })
        .collect();
    let build = |ls: &[TrajectoryLine]| {
        let mut agg = PointAggregate::empty(point, 1, BackendKind::Dense);
        ls.iter().for_each(|l| agg.push(l));
        agg
    };
    let whole = build(&lines);
    for k in 0..=7 {
        let (left, right) = lines.split_at(k);
        for merged in [build(left).merge(&build(right)), build(right).merge(&build(left))] {
            assert_eq!(merged.n_traj, whole.n_traj);
            let pairs = [
                (merged.ng, whole.ng),
                (merged.delta_nu, whole.delta_nu),
                (merged.gap_slope, whole.gap_slope),
                (merged.ng_per_particle, whole.ng_per_particle),
            ];
            let vectors = [(&merged.entropy, &whole.entropy), (&merged.nu, &whole.nu), (&merged.correlation, &whole.correlation)];
            let all = pairs.into_iter().chain(vectors.into_iter().flat_map(|(x, y)| x.0.iter().copied().zip(y.0.iter().copied())));
            for (x, y) in all {
                assert_eq!(x.n, y.n);
                assert!((x.mean - y.mean).abs() < 1e-12, "{x:?} {y:?}");
                assert!((x.stderr() - y.stderr()).abs() < 1e-12, "{x:?} {y:?}");
            }
        }
    }
}

#[test]
fn empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("output_dir = {:?}\n[grid]\nsizes = []\ngammas = []\n", dir.path().display().to_string());
    let p = ExperimentPlan::from_toml(&text).unwrap();
    let aggs = run_ensemble(&p, &RunOptions::default()).unwrap();
    assert!(aggs.is_empty());
    emit_outputs(&aggs, &p, dir.path()).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("aggregates.csv")).unwrap(), format!("{CSV_HEADER}\n"));
}

#[test]
fn row_count_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(dir.path(), 2);
    let aggs = run_ensemble(&p, &RunOptions::default()).unwrap();
    let csv = String::from_utf8(csv_bytes(&aggs)).unwrap();
    let expected: usize = p.points().iter().map(|pt| (pt.sites - 1) + pt.sites + 4).sum();
    assert_eq!(csv.lines().count(), 1 + expected);
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').count(), 9, "{line}");
    }
}

#[test]
fn summary_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = plan(dir.path(), 3);
    let aggs = run_ensemble(&p, &RunOptions::default()).unwrap();
    emit_outputs(&aggs, &p, dir.path()).unwrap();
    let loaded = load_summary(dir.path()).unwrap();
    assert_eq!(loaded, Summary::new(&aggs, &p));
    assert_eq!(loaded.gap_table.len(), 4);
    assert_eq!(loaded.plan, p);
}

#[test]
fn zeno_rate_pins_entropy_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "trajectories_per_point = 4\nbackend = \"dense\"\noutput_dir = {:?}\n[grid]\nsizes = [6]\ninteractions = [1.0]\ngammas = [20.0]\n\
         [time]\nn_steps = 60\n",
        dir.path().display().to_string()
    );
    let p = ExperimentPlan::from_toml(&text).unwrap();
    let aggs = run_ensemble(&p, &RunOptions::default()).unwrap();
    for s in &aggs[0].entropy.0 {
        assert_eq!((s.mean, s.stderr()), (0.0, 0.0));
    }
    assert_eq!(aggs[0].delta_nu.mean, 1.0);
}

#[test]
fn failing_trajectories_fail_the_point() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "trajectories_per_point = 3\nbackend = \"mps\"\noutput_dir = {:?}\n[grid]\nsizes = [6]\ninteractions = [1.0]\ngammas = [0.1]\n\
         [time]\nn_steps = 40\n[truncation]\nchi_max = 1\nsvd_cutoff = 0.0\nhard_limit = 1e-12\n",
        dir.path().display().to_string()
    );
    let p = ExperimentPlan::from_toml(&text).unwrap();
    let err = run_ensemble(&p, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::EnsembleFailure { failed: 3, total: 3, .. }), "{err}");
    let logged = fs::read_to_string(monitored_fermions::experiment::point_dir(dir.path(), &p.points()[0]).join(TRAJECTORY_FILE)).unwrap();
    assert!(logged.lines().all(|l| l.contains("\"error\"")));
}
