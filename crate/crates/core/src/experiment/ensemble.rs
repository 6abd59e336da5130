//! Ensemble execution: trajectories fan out over a worker pool, each reduces
//! its own record to late-time averages, and results are appended per grid
//! point to `trajectories.ndjson` so an interrupted run resumes where it stopped.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{ExperimentPlan, GridPoint};
use super::stats::{RunningStats, VectorStats};
use crate::backend::BackendKind;
use crate::dense::DenseState;
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::mps::MpsState;
use crate::observables::{gap, orbital_spectrum, total_ng};
use crate::trajectory::{run_trajectory, TrajectoryOptions, TrajectoryRecord, TrajectorySeed};

/// A grid point fails when more than this fraction of its trajectories fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

pub const TRAJECTORY_FILE: &str = "trajectories.ndjson";

/// Time averages of one trajectory after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateTimeAverages {
    pub samples: usize,
    /// `S(ℓ)`, `ℓ = 1..L-1`.
    pub entropy: Vec<f64>,
    /// Natural-orbital occupations, descending.
    pub nu: Vec<f64>,
    pub ng: f64,
    pub ng_per_particle: f64,
    pub delta_nu: f64,
    pub gap_slope: f64,
    /// One-body matrix, row-major `(re, im)` pairs.
    pub correlation: Vec<[f64; 2]>,
}

/// One line of `trajectories.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub index: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub late: Option<LateTimeAverages>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Late-time averages of a record, using snapshots at `t ≥ burn_in_fraction · T`.
/// Falls back to the last snapshot when none qualifies.
pub fn late_time_averages(record: &TrajectoryRecord, burn_in_fraction: f64) -> Result<LateTimeAverages> {
    let start = burn_in_fraction * record.spec.total_time() - 1e-9;
    let mut window: Vec<_> = record.snapshots.iter().filter(|s| s.time >= start).collect();
    if window.is_empty() {
        window.extend(record.snapshots.last());
    }
    let sites = record.spec.sites;
    let mut entropy = VectorStats::new(sites - 1);
    let mut nu = VectorStats::new(sites);
    let mut correlation = vec![[0.0; 2]; sites * sites];
    let (mut ng, mut ng_pp, mut dnu, mut slope) = (0.0, 0.0, 0.0, 0.0);
    for s in &window {
        entropy.push(&s.entropy);
        let spectrum = orbital_spectrum(&s.correlation)?;
        let g = gap(&spectrum)?;
        let total = total_ng(&spectrum);
        nu.push(&spectrum.nu);
        ng += total;
        ng_pp += total / spectrum.particles as f64;
        dnu += g.delta_nu;
        slope += g.slope;
        for i in 0..sites {
            for j in 0..sites {
                let z = s.correlation[(i, j)];
                correlation[i * sites + j][0] += z.re;
                correlation[i * sites + j][1] += z.im;
            }
        }
    }
    let k = window.len() as f64;
    correlation.iter_mut().for_each(|z| {
        z[0] /= k;
        z[1] /= k;
    });
    Ok(LateTimeAverages {
        samples: window.len(),
        entropy: entropy.means(),
        nu: nu.means(),
        ng: ng / k,
        ng_per_particle: ng_pp / k,
        delta_nu: dnu / k,
        gap_slope: slope / k,
        correlation,
    })
}

/// Trajectory-to-trajectory statistics of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAggregate {
    pub point: GridPoint,
    pub point_index: usize,
    pub backend: BackendKind,
    pub n_traj: usize,
    pub n_failed: usize,
    pub entropy: VectorStats,
    pub nu: VectorStats,
    pub ng: RunningStats,
    pub ng_per_particle: RunningStats,
    pub delta_nu: RunningStats,
    pub gap_slope: RunningStats,
    /// Interleaved `(re, im)` of the row-major one-body matrix.
    pub correlation: VectorStats,
}

impl PointAggregate {
    pub fn empty(point: GridPoint, point_index: usize, backend: BackendKind) -> Self {
        PointAggregate {
            point,
            point_index,
            backend,
            n_traj: 0,
            n_failed: 0,
            entropy: VectorStats::default(),
            nu: VectorStats::default(),
            ng: RunningStats::default(),
            ng_per_particle: RunningStats::default(),
            delta_nu: RunningStats::default(),
            gap_slope: RunningStats::default(),
            correlation: VectorStats::default(),
        }
    }

    pub fn push(&mut self, line: &TrajectoryLine) {
        match &line.late {
            Some(late) => {
                self.n_traj += 1;
                self.entropy.push(&late.entropy);
                self.nu.push(&late.nu);
                self.ng.push(late.ng);
                self.ng_per_particle.push(late.ng_per_particle);
                self.delta_nu.push(late.delta_nu);
                self.gap_slope.push(late.gap_slope);
                let flat: Vec<f64> = late.correlation.iter().flatten().copied().collect();
                self.correlation.push(&flat);
            }
            None => self.n_failed += 1,
        }
    }

    pub fn merge(&self, other: &PointAggregate) -> PointAggregate {
        PointAggregate {
            point: self.point,
            point_index: self.point_index,
            backend: self.backend,
            n_traj: self.n_traj + other.n_traj,
            n_failed: self.n_failed + other.n_failed,
            entropy: self.entropy.merge(&other.entropy),
            nu: self.nu.merge(&other.nu),
            ng: self.ng.merge(&other.ng),
            ng_per_particle: self.ng_per_particle.merge(&other.ng_per_particle),
            delta_nu: self.delta_nu.merge(&other.delta_nu),
            gap_slope: self.gap_slope.merge(&other.gap_slope),
            correlation: self.correlation.merge(&other.correlation),
        }
    }

    /// Mean one-body matrix as `(re, im)` rows.
    pub fn mean_correlation(&self) -> Vec<Vec<[f64; 2]>> {
        let l = self.point.sites;
        let means = self.correlation.means();
        if means.is_empty() {
            return Vec::new();
        }
        (0..l).map(|i| (0..l).map(|j| [means[2 * (i * l + j)], means[2 * (i * l + j) + 1]]).collect()).collect()
    }
}

/// Trajectory stream for `(point_index, index)`: distinct for every pair.
pub fn trajectory_seed(master_seed: u64, point_index: usize, index: u64) -> TrajectorySeed {
    TrajectorySeed::new(master_seed, ((point_index as u64) << 32) | index)
}

/// Run one trajectory of a grid point and reduce it to late-time averages.
pub fn run_point_trajectory(plan: &ExperimentPlan, point: &GridPoint, point_index: usize, index: u64) -> Result<LateTimeAverages> {
    let spec = plan.spec(point);
    let seed = trajectory_seed(plan.master_seed, point_index, index);
    let options = TrajectoryOptions { sampling_interval: plan.time.sampling_interval };
    let record = match plan.backend_for(point) {
        BackendKind::Dense => run_trajectory(&spec, DenseState::neel(point.sites)?, &seed, &options)?,
        BackendKind::Gaussian => run_trajectory(&spec, GaussianState::neel(point.sites), &seed, &options)?,
        BackendKind::Mps => run_trajectory(&spec, MpsState::neel(point.sites, plan.truncation)?, &seed, &options)?,
    };
    late_time_averages(&record, plan.time.burn_in_fraction)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    /// Reuse completed trajectories found on disk.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { workers: 1, resume: true }
    }
}

pub fn point_dir(output_dir: &Path, point: &GridPoint) -> PathBuf {
    output_dir.join("points").join(point.id())
}

/// Completed lines on disk, keyed by index. A truncated trailing line is dropped.
fn read_lines(path: &Path) -> Result<BTreeMap<u64, TrajectoryLine>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        match serde_json::from_str::<TrajectoryLine>(&line) {
            Ok(parsed) => {
                out.insert(parsed.index, parsed);
            }
            Err(e) => log::warn!("skipping unreadable line in {}: {e}", path.display()),
        }
    }
    Ok(out)
}

fn write_lines(path: &Path, lines: &BTreeMap<u64, TrajectoryLine>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in lines.values() {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Run every grid point of `plan`, persisting per-trajectory results as they complete.
pub fn run_ensemble(plan: &ExperimentPlan, options: &RunOptions) -> Result<Vec<PointAggregate>> {
    plan.validate()?;
    fs::create_dir_all(&plan.output_dir)?;
    fs::write(plan.output_dir.join("plan.toml"), plan.to_toml())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let chunk = (options.workers.max(1) * 4).max(8);
    let mut aggregates = Vec::new();
    for (point_index, point) in plan.points().iter().enumerate() {
        let dir = point_dir(&plan.output_dir, point);
        fs::create_dir_all(&dir)?;
        let path = dir.join(TRAJECTORY_FILE);
        let total = plan.trajectories_per_point as u64;
        let mut lines = if options.resume { read_lines(&path)? } else { BTreeMap::new() };
        lines.retain(|&i, _| i < total);
        write_lines(&path, &lines)?;
        let todo: Vec<u64> = (0..total).filter(|i| !lines.contains_key(i)).collect();
        log::info!("{}: {} of {} trajectories to run", point.id(), todo.len(), total);
        let mut file = BufWriter::new(OpenOptions::new().append(true).open(&path)?);
        for batch in todo.chunks(chunk) {
            let results: Vec<TrajectoryLine> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&index| match run_point_trajectory(plan, point, point_index, index) {
                        Ok(late) => TrajectoryLine { index, late: Some(late), error: None },
                        Err(e) => TrajectoryLine { index, late: None, error: Some(e.to_string()) },
                    })
                    .collect()
            });
            for line in results {
                if let Some(e) = &line.error {
                    log::warn!("{} trajectory {}: {e}", point.id(), line.index);
                }
                serde_json::to_writer(&mut file, &line)?;
                file.write_all(b"\n")?;
                lines.insert(line.index, line);
            }
            file.flush()?;
        }
        let mut agg = PointAggregate::empty(*point, point_index, plan.backend_for(point));
        lines.values().for_each(|line| agg.push(line));
        if agg.n_failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
            return Err(Error::EnsembleFailure { point: point.id(), failed: agg.n_failed, total: total as usize });
        }
        aggregates.push(agg);
    }
    Ok(aggregates)
}
