use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use monitored_fermions::experiment::{
    emit_outputs, finite_size_scan, load_plan, load_summary, run_ensemble, validation::run_validation, GapPoint, RunOptions,
    ScanResult, Summary,
};
use monitored_fermions::model::ObservableKind;
use monitored_fermions::observables::{cft_fit, EntropyProfile};
use monitored_fermions::Error;

/// Monitored fermion chain experiments.
#[derive(Parser)]
#[command(name = "monfer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every grid point of a plan and write aggregates.csv and summary.json.
    Run {
        plan: PathBuf,
        /// Worker threads.
        #[arg(long, env = "MONFER_WORKERS", default_value_t = 1)]
        workers: usize,
        /// Ignore trajectories already on disk.
        #[arg(long)]
        fresh: bool,
    },
    /// Run the oracle cross-check suite.
    Validate {
        /// Trajectories per sampled cross-check.
        #[arg(long, default_value_t = 5)]
        trajectories: u64,
    },
    /// Finite-size gap scan over the sizes in a results directory.
    Scan { results: PathBuf },
    /// Chord-length fits of the mean entropy profiles in a results directory.
    Fit {
        results: PathBuf,
        #[arg(long)]
        min_ell: Option<usize>,
        #[arg(long)]
        max_ell: Option<usize>,
    },
}

fn run(plan: &Path, workers: usize, fresh: bool) -> Result<(), Error> {
    let plan = load_plan(plan)?;
    let aggregates = run_ensemble(&plan, &RunOptions { workers, resume: !fresh })?;
    emit_outputs(&aggregates, &plan, &plan.output_dir)?;
    for a in &aggregates {
        println!(
            "{:<32} {:>5} traj  delta_nu {:.4} +- {:.4}  NG/N {:.4}",
            a.point.id(),
            a.n_traj,
            a.delta_nu.mean,
            a.delta_nu.stderr(),
            a.ng_per_particle.mean
        );
    }
    println!("wrote {}", plan.output_dir.display());
    Ok(())
}

fn validate(trajectories: u64) -> Result<bool, Error> {
    let checks = run_validation(trajectories);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn groups(summary: &Summary) -> Vec<((f64, ObservableKind), Vec<GapPoint>)> {
    let mut out: Vec<((f64, ObservableKind), Vec<GapPoint>)> = Vec::new();
    for row in &summary.gap_table {
        let key = (row.interaction, row.observable);
        let point = GapPoint { sites: row.sites, gamma: row.gamma, delta_nu: row.delta_nu.mean, stderr: row.delta_nu.stderr };
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(point),
            None => out.push((key, vec![point])),
        }
    }
    out
}

fn print_scan(scan: &ScanResult) {
    for row in &scan.rows {
        let sizes: Vec<String> =
            row.sizes.iter().map(|s| format!("L={} dnu={:.4}+-{:.4} slope={:.3}", s.sites, s.delta_nu, s.stderr, s.slope)).collect();
        println!("  gamma {:<6} {}  extrapolated {:.4}", row.gamma, sizes.join("  "), row.extrapolated_gap);
    }
    for p in &scan.pairs {
        match p.gamma {
            Some(g) => println!("  L={} vs L={}: crossing at gamma {g:.4}", p.small, p.large),
            None => println!("  L={} vs L={}: undetermined ({})", p.small, p.large, p.diagnostic),
        }
    }
    match scan.crossing_estimate() {
        Ok(g) => println!("  crossing estimate {g:.4} (grid resolution {:.4})", scan.grid_resolution),
        Err(e) => println!("  {e}"),
    }
}

fn scan(results: &Path) -> Result<(), Error> {
    let summary = load_summary(results)?;
    let mut all = Vec::new();
    for ((u, observable), points) in groups(&summary) {
        println!("U = {u}, {observable}");
        let scan = finite_size_scan(&points)?;
        print_scan(&scan);
        all.push(serde_json::json!({ "interaction": u, "observable": observable, "scan": scan }));
    }
    let dir = if results.is_dir() { results.to_path_buf() } else { results.parent().unwrap_or(Path::new(".")).to_path_buf() };
    std::fs::write(dir.join("scan.json"), serde_json::to_string_pretty(&all)? + "\n")?;
    Ok(())
}

fn fit(results: &Path, min_ell: Option<usize>, max_ell: Option<usize>) -> Result<(), Error> {
    let summary = load_summary(results)?;
    println!("{:<32} {:>10} {:>10} {:>10}", "point", "alpha", "s0", "residual");
    for p in &summary.points {
        let l = p.point.sites;
        let range = (min_ell.is_some() || max_ell.is_some()).then(|| min_ell.unwrap_or(2)..=max_ell.unwrap_or(l.saturating_sub(2)));
        let profile = EntropyProfile(p.entropy.iter().map(|m| m.mean).collect());
        match cft_fit(&profile, l, range) {
            Ok(f) => println!("{:<32} {:>10.5} {:>10.5} {:>10.2e}", p.point.id(), f.alpha, f.s0, f.residual),
            Err(e) => println!("{:<32} {e}", p.point.id()),
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_config() {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { plan, workers, fresh } => run(&plan, workers, fresh).map(|_| true),
        Command::Validate { trajectories } => validate(trajectories),
        Command::Scan { results } => scan(&results).map(|_| true),
        Command::Fit { results, min_ell, max_ell } => fit(&results, min_ell, max_ell).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
