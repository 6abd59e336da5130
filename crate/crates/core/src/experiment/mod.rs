//! Experiment plans, ensemble runs, aggregated outputs and finite-size analysis.

mod ensemble;
mod output;
mod plan;
mod scan;
mod stats;
pub mod validation;

pub use ensemble::{
    late_time_averages, point_dir, run_ensemble, run_point_trajectory, trajectory_seed, LateTimeAverages, PointAggregate,
    RunOptions, TrajectoryLine, MAX_FAILURE_FRACTION, TRAJECTORY_FILE,
};
pub use output::{emit_outputs, load_summary, write_csv, GapRow, MeanErr, PointSummary, Summary, CSV_HEADER, SUMMARY_VERSION};
pub use plan::{load_plan, BackendChoice, ExperimentPlan, Grid, GridPoint, TimeSettings, AUTO_DENSE_LIMIT};
pub use scan::{finite_size_scan, GapPoint, PairCrossing, ScanResult, ScanRow, SizeEntry};
pub use stats::{RunningStats, VectorStats};
