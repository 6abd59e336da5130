//! Oracle cross-checks run by the `validate` command.

use std::f64::consts::LN_2;

use crate::dense::{lindblad_rhs, DenseState, DensityMatrix};
use crate::error::Result;
use crate::gaussian::GaussianState;
use crate::linalg::max_abs_diff;
use crate::model::{ChainSpec, ObservableKind};
use crate::mps::{MpsState, TruncationPolicy};
use crate::observables::{cft_fit, chord_length, orbital_spectrum, total_ng, EntropyProfile};
use crate::trajectory::{replay, run_trajectory, TrajectoryOptions, TrajectoryRecord, TrajectorySeed};

use super::scan::{finite_size_scan, GapPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: Result<(bool, String)>) -> Check {
    match result {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn snapshot_deviation(a: &TrajectoryRecord, b: &TrajectoryRecord) -> f64 {
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| {
            let s = x.entropy.iter().zip(&y.entropy).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            s.max(max_abs_diff(&x.correlation, &y.correlation))
        })
        .fold(0.0, f64::max)
}

fn dense_vs_mps(trajectories: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut same_events = true;
    for (u, kind) in [(0.0, ObservableKind::Occupation), (1.0, ObservableKind::Current)] {
        let spec = ChainSpec::new(8, u, 0.5, kind).with_steps(100);
        for i in 0..trajectories {
            let seed = TrajectorySeed::new(17, i);
            let opts = TrajectoryOptions { sampling_interval: 0.5 };
            let d = run_trajectory(&spec, DenseState::neel(8)?, &seed, &opts)?;
            let m = run_trajectory(&spec, MpsState::neel(8, TruncationPolicy::exact())?, &seed, &opts)?;
            same_events &= d.events.iter().zip(&m.events).all(|(a, b)| (a.location, a.outcome) == (b.location, b.outcome))
                && d.events.len() == m.events.len();
            worst = worst.max(snapshot_deviation(&d, &m));
        }
    }
    Ok((same_events && worst < 1e-7, format!("identical outcomes: {same_events}, max deviation {worst:.2e}")))
}

fn gaussian_vs_dense(trajectories: u64) -> Result<(bool, String)> {
    let spec = ChainSpec::new(8, 0.0, 0.5, ObservableKind::Occupation).with_steps(100);
    let mut worst: f64 = 0.0;
    let mut ng: f64 = 0.0;
    for i in 0..trajectories {
        let seed = TrajectorySeed::new(23, i);
        let opts = TrajectoryOptions { sampling_interval: 0.5 };
        let g = run_trajectory(&spec, GaussianState::neel(8), &seed, &opts)?;
        let d = run_trajectory(&spec, DenseState::neel(8)?, &seed, &opts)?;
        worst = worst.max(snapshot_deviation(&g, &d));
        for s in &d.snapshots {
            ng = ng.max(total_ng(&orbital_spectrum(&s.correlation)?));
        }
    }
    Ok((worst < 1e-8 && ng < 1e-8, format!("max deviation {worst:.2e}, max NG {ng:.2e}")))
}

fn replay_across_backends() -> Result<(bool, String)> {
    let spec = ChainSpec::new(8, 1.0, 0.4, ObservableKind::Current).with_steps(80);
    let record = run_trajectory(&spec, DenseState::neel(8)?, &TrajectorySeed::new(5, 0), &TrajectoryOptions::default())?;
    let again = replay(&record, MpsState::neel(8, TruncationPolicy::exact())?)?;
    let dev = snapshot_deviation(&record, &again.record);
    Ok((dev < 1e-7, format!("max observable deviation {dev:.2e}, max probability drift {:.2e}", again.max_deviation)))
}

fn zeno_limit() -> Result<(bool, String)> {
    let spec = ChainSpec::new(8, 1.0, 20.0, ObservableKind::Occupation).with_steps(40);
    let record = run_trajectory(&spec, DenseState::neel(8)?, &TrajectorySeed::new(3, 0), &TrajectoryOptions { sampling_interval: 0.05 })?;
    let mut max_s: f64 = 0.0;
    let mut min_gap: f64 = 1.0;
    for s in &record.snapshots {
        max_s = s.entropy.iter().copied().fold(max_s, f64::max);
        let spec = orbital_spectrum(&s.correlation)?;
        min_gap = min_gap.min(crate::observables::gap(&spec)?.delta_nu);
    }
    Ok((max_s == 0.0 && (min_gap - 1.0).abs() < 1e-12, format!("max S {max_s:e}, min gap {min_gap}")))
}

fn unital_dissipator() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for kind in [ObservableKind::Occupation, ObservableKind::Current] {
        let spec = ChainSpec::new(4, 1.0, 0.7, kind);
        let d = lindblad_rhs(&DensityMatrix::maximally_mixed(4)?, &spec)?;
        worst = worst.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok((worst < 1e-12, format!("max |L(I)| = {worst:.2e}")))
}

fn ng_bound() -> Result<(bool, String)> {
    let spec = ChainSpec::new(8, 1.0, 0.3, ObservableKind::Current).with_steps(100);
    let record = run_trajectory(&spec, DenseState::neel(8)?, &TrajectorySeed::new(9, 0), &TrajectoryOptions { sampling_interval: 0.25 })?;
    let bound = 2.0 * 4.0 * LN_2;
    let worst = record
        .snapshots
        .iter()
        .map(|s| orbital_spectrum(&s.correlation).map(|sp| total_ng(&sp)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= bound + 1e-9, format!("max NG {worst:.4} against bound {bound:.4}")))
}

fn fit_recovery() -> Result<(bool, String)> {
    let l = 24;
    let profile = EntropyProfile((1..l).map(|ell| 0.5 * chord_length(ell, l).ln() + 0.3).collect());
    let fit = cft_fit(&profile, l, None)?;
    let ok = (fit.alpha - 0.5).abs() < 1e-10 && (fit.s0 - 0.3).abs() < 1e-10 && fit.residual < 1e-10;
    Ok((ok, format!("alpha {:.12}, s0 {:.12}, residual {:.1e}", fit.alpha, fit.s0, fit.residual)))
}

fn crossing_fixture() -> Result<(bool, String)> {
    let gammas: Vec<f64> = (0..=10).map(|k| 0.05 * k as f64).collect();
    let points: Vec<GapPoint> = [8usize, 12, 16]
        .iter()
        .flat_map(|&l| gammas.iter().map(move |&g| GapPoint { sites: l, gamma: g, delta_nu: (g - 0.2f64).max(0.0), stderr: 0.0 }))
        .collect();
    let scan = finite_size_scan(&points)?;
    let est = scan.crossing_estimate()?;
    Ok(((est - 0.2).abs() <= scan.grid_resolution, format!("crossing {est:.4} (grid resolution {:.2})", scan.grid_resolution)))
}

/// Run every check; `trajectories` controls the size of the sampled cross-checks.
pub fn run_validation(trajectories: u64) -> Vec<Check> {
    vec![
        check("dense vs MPS trajectories (L=8)", dense_vs_mps(trajectories)),
        check("Gaussian vs dense trajectories (L=8)", gaussian_vs_dense(trajectories)),
        check("dense record replayed on MPS", replay_across_backends()),
        check("Zeno limit pins product states", zeno_limit()),
        check("dissipator is unital", unital_dissipator()),
        check("NG below 2N ln 2", ng_bound()),
        check("chord-length fit recovery", fit_recovery()),
        check("crossing on synthetic slopes", crossing_fixture()),
    ]
}
