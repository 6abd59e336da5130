//! `aggregates.csv` and `summary.json`.
//!
//! CSV columns: `gamma,L,U,observable,ell_or_alpha,quantity,mean,stderr,n_traj`.
//! Per grid point the rows are the entropies `S(ℓ)` for `ℓ = 1..L-1`
//! (quantity `entropy`, index `ℓ`), the orbital occupations for `α = 0..L-1`
//! in descending order (quantity `nu`), then the scalars `ng`,
//! `ng_per_particle`, `delta_nu` and `gap_slope` with an empty index.
//! Entropies and NG are in nats. Floats use the shortest representation that
//! round-trips, so identical aggregates give identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ensemble::PointAggregate;
use super::plan::{ExperimentPlan, GridPoint};
use super::stats::RunningStats;
use crate::backend::BackendKind;
use crate::error::Result;
use crate::observables::{cft_fit, CftFit, EntropyProfile};

pub const CSV_HEADER: &str = "gamma,L,U,observable,ell_or_alpha,quantity,mean,stderr,n_traj";
pub const SUMMARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanErr {
    pub mean: f64,
    pub stderr: f64,
}

impl From<&RunningStats> for MeanErr {
    fn from(s: &RunningStats) -> Self {
        MeanErr { mean: s.mean, stderr: s.stderr() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: GridPoint,
    pub point_index: usize,
    pub backend: BackendKind,
    /// Trajectory `i` of this point used rng stream `stream_base + i`.
    pub stream_base: u64,
    pub n_traj: usize,
    pub n_failed: usize,
    pub entropy: Vec<MeanErr>,
    pub nu: Vec<MeanErr>,
    pub ng: MeanErr,
    pub ng_per_particle: MeanErr,
    pub delta_nu: MeanErr,
    pub gap_slope: MeanErr,
    /// Chord-length fit of the mean entropy profile, when the chain is long enough.
    pub fit: Option<CftFit>,
    pub mean_correlation: Vec<Vec<[f64; 2]>>,
}

impl PointSummary {
    pub fn from_aggregate(agg: &PointAggregate) -> Self {
        let entropy: Vec<MeanErr> = agg.entropy.0.iter().map(MeanErr::from).collect();
        let profile = EntropyProfile(entropy.iter().map(|m| m.mean).collect());
        PointSummary {
            point: agg.point,
            point_index: agg.point_index,
            backend: agg.backend,
            stream_base: (agg.point_index as u64) << 32,
            n_traj: agg.n_traj,
            n_failed: agg.n_failed,
            nu: agg.nu.0.iter().map(MeanErr::from).collect(),
            ng: (&agg.ng).into(),
            ng_per_particle: (&agg.ng_per_particle).into(),
            delta_nu: (&agg.delta_nu).into(),
            gap_slope: (&agg.gap_slope).into(),
            fit: cft_fit(&profile, agg.point.sites, None).ok(),
            mean_correlation: agg.mean_correlation(),
            entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub sites: usize,
    pub interaction: f64,
    pub gamma: f64,
    pub observable: crate::model::ObservableKind,
    pub delta_nu: MeanErr,
    pub gap_slope: MeanErr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub crate_version: String,
    pub master_seed: u64,
    pub plan: ExperimentPlan,
    pub gap_table: Vec<GapRow>,
    pub points: Vec<PointSummary>,
}

impl Summary {
    pub fn new(aggregates: &[PointAggregate], plan: &ExperimentPlan) -> Self {
        let points: Vec<PointSummary> = aggregates.iter().map(PointSummary::from_aggregate).collect();
        let gap_table = points
            .iter()
            .map(|p| GapRow {
                sites: p.point.sites,
                interaction: p.point.interaction,
                gamma: p.point.gamma,
                observable: p.point.observable,
                delta_nu: p.delta_nu,
                gap_slope: p.gap_slope,
            })
            .collect();
        Summary {
            format_version: SUMMARY_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: plan.master_seed,
            plan: plan.clone(),
            gap_table,
            points,
        }
    }
}

fn row(out: &mut impl Write, p: &GridPoint, index: Option<usize>, quantity: &str, s: &RunningStats, n: usize) -> std::io::Result<()> {
    let index = index.map(|i| i.to_string()).unwrap_or_default();
    writeln!(
        out,
        "{},{},{},{},{},{},{:?},{:?},{}",
        p.gamma, p.sites, p.interaction, p.observable, index, quantity, s.mean, s.stderr(), n
    )
}

pub fn write_csv(aggregates: &[PointAggregate], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for agg in aggregates {
        let p = &agg.point;
        let n = agg.n_traj;
        for (k, s) in agg.entropy.0.iter().enumerate() {
            row(out, p, Some(k + 1), "entropy", s, n)?;
        }
        for (k, s) in agg.nu.0.iter().enumerate() {
            row(out, p, Some(k), "nu", s, n)?;
        }
        row(out, p, None, "ng", &agg.ng, n)?;
        row(out, p, None, "ng_per_particle", &agg.ng_per_particle, n)?;
        row(out, p, None, "delta_nu", &agg.delta_nu, n)?;
        row(out, p, None, "gap_slope", &agg.gap_slope, n)?;
    }
    Ok(())
}

/// Write `aggregates.csv` and `summary.json` into `dir`.
pub fn emit_outputs(aggregates: &[PointAggregate], plan: &ExperimentPlan, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("aggregates.csv"))?);
    write_csv(aggregates, &mut csv)?;
    csv.flush()?;
    let mut json = BufWriter::new(File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut json, &Summary::new(aggregates, plan))?;
    json.write_all(b"\n")?;
    json.flush()?;
    Ok(())
}

/// Load a `summary.json` written by [`emit_outputs`]; accepts the file or its directory.
pub fn load_summary(path: &Path) -> Result<Summary> {
    let path = if path.is_dir() { path.join("summary.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&path)?;
    Ok(serde_json::from_str(&text)?)
}
