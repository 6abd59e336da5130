//! TOML experiment plans.
//!
//! ```toml
//! master_seed = 2024
//! trajectories_per_point = 200
//! backend = "auto"            # dense | gaussian | mps | auto
//! output_dir = "results"
//!
//! [grid]
//! sizes = [8, 12]
//! interactions = [1.0]
//! gammas = [0.05, 0.2, 0.5, 2.0]
//! observables = ["occupation"]
//!
//! [time]
//! dt = 0.05
//! n_steps = 400
//! sampling_interval = 1.0
//! burn_in_fraction = 0.5
//!
//! [truncation]
//! chi_max = 256
//! svd_cutoff = 1e-10
//! hard_limit = 1e-4
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::BackendKind;
use crate::dense::MAX_DENSE_SITES;
use crate::error::{Error, Result};
use crate::model::{ChainSpec, InitialState, ObservableKind, DEFAULT_DT};
use crate::mps::TruncationPolicy;
use crate::trajectory::ensure_compatible;

/// Largest chain the `auto` backend choice runs densely.
pub const AUTO_DENSE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Dense,
    Gaussian,
    Mps,
    /// Gaussian when exact, dense up to [`AUTO_DENSE_LIMIT`] sites, MPS beyond.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub sizes: Vec<usize>,
    #[serde(default = "default_interactions")]
    pub interactions: Vec<f64>,
    pub gammas: Vec<f64>,
    #[serde(default = "default_observables")]
    pub observables: Vec<ObservableKind>,
}

fn default_interactions() -> Vec<f64> {
    vec![0.0]
}

fn default_observables() -> Vec<ObservableKind> {
    vec![ObservableKind::Occupation]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSettings {
    pub dt: f64,
    pub n_steps: usize,
    /// Time between observable snapshots.
    pub sampling_interval: f64,
    /// Fraction of the run discarded before late-time averaging.
    pub burn_in_fraction: f64,
}

impl Default for TimeSettings {
    fn default() -> Self {
        TimeSettings { dt: DEFAULT_DT, n_steps: 400, sampling_interval: 1.0, burn_in_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_trajectories")]
    pub trajectories_per_point: usize,
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub grid: Grid,
    #[serde(default)]
    pub time: TimeSettings,
    #[serde(default)]
    pub truncation: TruncationPolicy,
}

fn default_trajectories() -> usize {
    100
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// One `(L, U, γ, observable)` combination of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sites: usize,
    pub interaction: f64,
    pub gamma: f64,
    pub observable: ObservableKind,
}

impl GridPoint {
    /// Directory-safe identifier.
    pub fn id(&self) -> String {
        format!("L{}_U{}_g{}_{}", self.sites, self.interaction, self.gamma, self.observable)
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text).map_err(|e| Error::config("plan", e.message().to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plans always serialize")
    }

    /// Grid points in the fixed order sizes, interactions, gammas, observables.
    pub fn points(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let mut out = Vec::new();
        for &sites in &g.sizes {
            for &interaction in &g.interactions {
                for &gamma in &g.gammas {
                    for &observable in &g.observables {
                        out.push(GridPoint { sites, interaction, gamma, observable });
                    }
                }
            }
        }
        out
    }

    pub fn spec(&self, point: &GridPoint) -> ChainSpec {
        ChainSpec {
            sites: point.sites,
            interaction: point.interaction,
            gamma: point.gamma,
            observable: point.observable,
            dt: self.time.dt,
            n_steps: self.time.n_steps,
            initial_state: InitialState::Neel,
        }
    }

    /// Concrete backend for a grid point.
    pub fn backend_for(&self, point: &GridPoint) -> BackendKind {
        match self.backend {
            BackendChoice::Dense => BackendKind::Dense,
            BackendChoice::Gaussian => BackendKind::Gaussian,
            BackendChoice::Mps => BackendKind::Mps,
            BackendChoice::Auto => {
                if point.interaction == 0.0 && point.observable == ObservableKind::Occupation {
                    BackendKind::Gaussian
                } else if point.sites <= AUTO_DENSE_LIMIT {
                    BackendKind::Dense
                } else {
                    BackendKind::Mps
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories_per_point < 1 {
            return Err(Error::config("trajectories_per_point", "must be at least 1"));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(Error::config("time.dt", "must be positive"));
        }
        if t.n_steps < 1 {
            return Err(Error::config("time.n_steps", "must be at least 1"));
        }
        if !(t.sampling_interval > 0.0 && t.sampling_interval.is_finite()) {
            return Err(Error::config("time.sampling_interval", "must be positive"));
        }
        if !(0.0..1.0).contains(&t.burn_in_fraction) {
            return Err(Error::config("time.burn_in_fraction", "must lie in [0, 1)"));
        }
        self.truncation.validate()?;
        if let Some(&l) = self.grid.sizes.iter().find(|&&l| l < 2) {
            return Err(Error::config("grid.sizes", format!("chains need at least 2 sites, got {l}")));
        }
        if let Some(&u) = self.grid.interactions.iter().find(|u| !u.is_finite()) {
            return Err(Error::config("grid.interactions", format!("{u} is not finite")));
        }
        for &g in &self.grid.gammas {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config("grid.gammas", format!("{g} is not a valid rate")));
            }
            if g * t.dt > 1.0 + 1e-12 {
                return Err(Error::config("grid.gammas", format!("gamma * dt = {} exceeds 1 for gamma = {g}", g * t.dt)));
            }
        }
        for point in self.points() {
            let kind = self.backend_for(&point);
            if kind == BackendKind::Dense && point.sites > MAX_DENSE_SITES {
                return Err(Error::config(
                    "backend",
                    format!("dense backend supports at most {MAX_DENSE_SITES} sites, grid has {}", point.sites),
                ));
            }
            ensure_compatible(kind, &self.spec(&point))
                .map_err(|e| Error::config("backend", format!("{kind} cannot run {}: {e}", point.id())))?;
        }
        Ok(())
    }
}

/// Read and validate a plan file.
pub fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("plan", format!("cannot read {}: {e}", path.display())))?;
    ExperimentPlan::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nsizes = [6]\ngammas = [0.5]\n";

    #[test]
    fn minimal_plan_gets_defaults() {
        let plan = ExperimentPlan::from_toml(MINIMAL).unwrap();
        assert_eq!(plan.trajectories_per_point, 100);
        assert_eq!(plan.time, TimeSettings::default());
        assert_eq!(plan.truncation, TruncationPolicy::default());
        assert_eq!(plan.grid.observables, vec![ObservableKind::Occupation]);
        let echoed = ExperimentPlan::from_toml(&plan.to_toml()).unwrap();
        assert_eq!(echoed, plan);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentPlan::from_toml("trajectories = 3\n[grid]\nsizes = [6]\ngammas = [0.5]\n").unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("trajectories"), "{err}");
        let err = ExperimentPlan::from_toml("[grid]\nsizes = [6]\ngamas = [0.5]\n").unwrap_err();
        assert!(err.to_string().contains("gamas"), "{err}");
    }

    #[test]
    fn excessive_rate_names_the_field() {
        let err = ExperimentPlan::from_toml("[grid]\nsizes = [6]\ngammas = [30.0]\n").unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "grid.gammas"), "{err}");
    }

    #[test]
    fn gaussian_with_current_rejected() {
        let text = "backend = \"gaussian\"\n[grid]\nsizes = [6]\ngammas = [0.5]\nobservables = [\"current\"]\n";
        let err = ExperimentPlan::from_toml(text).unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "backend"), "{err}");
    }

    #[test]
    fn auto_backend_resolution() {
        let text = "[grid]\nsizes = [8, 20]\ninteractions = [0.0, 1.0]\ngammas = [0.5]\nobservables = [\"occupation\", \"current\"]\n";
        let plan = ExperimentPlan::from_toml(text).unwrap();
        let kinds: Vec<_> = plan.points().iter().map(|p| plan.backend_for(p)).collect();
        use BackendKind::*;
        assert_eq!(kinds, vec![Gaussian, Dense, Dense, Dense, Gaussian, Mps, Mps, Mps]);
    }

    #[test]
    fn point_order_and_ids() {
        let text = "[grid]\nsizes = [4, 6]\ngammas = [0.1, 0.2]\n";
        let plan = ExperimentPlan::from_toml(text).unwrap();
        let ids: Vec<_> = plan.points().iter().map(GridPoint::id).collect();
        assert_eq!(ids, ["L4_U0_g0.1_occupation", "L4_U0_g0.2_occupation", "L6_U0_g0.1_occupation", "L6_U0_g0.2_occupation"]);
    }
}
