//! Finite-size analysis of the occupation gap.
//!
//! For each γ the gap `Δν(L)` and slope `Δν·L` are tabulated and `Δν` is
//! extrapolated linearly in `1/L`. For consecutive sizes `L1 < L2` the
//! difference `slope(L2) - slope(L1)` is followed along the γ grid; its single
//! change from `≤ 0` to `> 0` is located by linear interpolation. The crossing
//! estimate is the mean over all consecutive pairs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean gap of one `(L, γ)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub sites: usize,
    pub gamma: f64,
    pub delta_nu: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeEntry {
    pub sites: usize,
    pub delta_nu: f64,
    pub stderr: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub gamma: f64,
    pub sizes: Vec<SizeEntry>,
    /// Intercept of the least-squares line `Δν = a + b/L`.
    pub extrapolated_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCrossing {
    pub small: usize,
    pub large: usize,
    pub gamma: Option<f64>,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub pairs: Vec<PairCrossing>,
    /// Mean pairwise crossing; `None` if any pair is undetermined.
    pub crossing: Option<f64>,
    /// Spacing of the γ grid, the resolution of the estimate.
    pub grid_resolution: f64,
}

impl ScanResult {
    pub fn crossing_estimate(&self) -> Result<f64> {
        self.crossing.ok_or_else(|| {
            let why: Vec<String> =
                self.pairs.iter().filter(|p| p.gamma.is_none()).map(|p| format!("L={}/{}: {}", p.small, p.large, p.diagnostic)).collect();
            Error::CrossingUndetermined(why.join("; "))
        })
    }
}

fn extrapolate(entries: &[SizeEntry]) -> f64 {
    let n = entries.len() as f64;
    let xs: Vec<f64> = entries.iter().map(|e| 1.0 / e.sites as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = entries.iter().map(|e| e.delta_nu).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(entries).map(|(x, e)| (x - mx) * (e.delta_nu - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    my - b * mx
}

fn pair_crossing(gammas: &[f64], diff: &[f64]) -> (Option<f64>, String) {
    let mut changes = Vec::new();
    for k in 0..diff.len() - 1 {
        let (a, b) = (diff[k] > 0.0, diff[k + 1] > 0.0);
        if a != b {
            changes.push((k, b));
        }
    }
    match changes.as_slice() {
        [] => (None, "slope difference never changes sign".into()),
        [(k, true)] => {
            let (g0, g1, d0, d1) = (gammas[*k], gammas[k + 1], diff[*k], diff[k + 1]);
            (Some(g0 + (0.0 - d0) * (g1 - g0) / (d1 - d0)), "single crossing".into())
        }
        [(_, false)] => (None, "slopes cross in the wrong direction".into()),
        _ => (None, format!("{} sign changes, data too noisy", changes.len())),
    }
}

/// Tabulate gaps over sizes and estimate the slope crossing.
pub fn finite_size_scan(points: &[GapPoint]) -> Result<ScanResult> {
    let sizes: BTreeSet<usize> = points.iter().map(|p| p.sites).collect();
    if sizes.len() < 2 {
        return Err(Error::CrossingUndetermined(format!("need at least 2 system sizes, got {}", sizes.len())));
    }
    let mut gammas: Vec<f64> = points.iter().map(|p| p.gamma).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let lookup = |l: usize, g: f64| points.iter().find(|p| p.sites == l && p.gamma == g);

    let rows: Vec<ScanRow> = gammas
        .iter()
        .map(|&gamma| {
            let sizes: Vec<SizeEntry> = sizes
                .iter()
                .filter_map(|&l| lookup(l, gamma))
                .map(|p| SizeEntry { sites: p.sites, delta_nu: p.delta_nu, stderr: p.stderr, slope: p.delta_nu * p.sites as f64 })
                .collect();
            let extrapolated_gap = extrapolate(&sizes);
            ScanRow { gamma, sizes, extrapolated_gap }
        })
        .collect();

    let size_list: Vec<usize> = sizes.into_iter().collect();
    let mut pairs = Vec::new();
    for w in size_list.windows(2) {
        let (small, large) = (w[0], w[1]);
        let (gs, diff): (Vec<f64>, Vec<f64>) = gammas
            .iter()
            .filter_map(|&g| {
                let a = lookup(small, g)?;
                let b = lookup(large, g)?;
                Some((g, b.delta_nu * large as f64 - a.delta_nu * small as f64))
            })
            .unzip();
        let (gamma, diagnostic) =
            if gs.len() < 2 { (None, "fewer than 2 shared rates".to_string()) } else { pair_crossing(&gs, &diff) };
        pairs.push(PairCrossing { small, large, gamma, diagnostic });
    }
    let crossing = if pairs.iter().all(|p| p.gamma.is_some()) {
        Some(pairs.iter().filter_map(|p| p.gamma).sum::<f64>() / pairs.len() as f64)
    } else {
        None
    };
    let grid_resolution = gammas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(ScanResult { rows, pairs, crossing, grid_resolution })
}
