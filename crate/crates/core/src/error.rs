use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain: {0}")]
    InvalidSpec(String),

    #[error("bond {bond} is out of range for a chain of {sites} sites")]
    BondOutOfRange { bond: usize, sites: usize },

    #[error("site {site} is out of range for a chain of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("operator has wrong shape: expected {expected}x{expected}, found {rows}x{cols}")]
    OperatorShape { expected: usize, rows: usize, cols: usize },

    #[error("selected outcome has probability {prob:.3e}; draw and state are inconsistent")]
    DegenerateProjection { prob: f64 },

    #[error("unsupported by this backend: {0}")]
    Unsupported(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("truncation failure at bond {bond}: discarded weight {discarded:.3e} with chi_max {chi_max}")]
    TruncationFailure { bond: usize, discarded: f64, chi_max: usize },

    #[error("system of {sites} sites exceeds the dense limit of {limit}")]
    TooLarge { sites: usize, limit: usize },

    #[error("integration drift: trace moved by {drift:.3e}")]
    IntegrationDrift { drift: f64 },

    #[error("replay diverged at step {step}, location {location}: logged p = {logged}, recomputed p = {recomputed}")]
    ReplayMismatch { step: usize, location: usize, logged: f64, recomputed: f64 },

    #[error("at step {step}{}: {source}", at_location(.location))]
    Trajectory {
        step: usize,
        location: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("grid point {point}: {failed} of {total} trajectories failed")]
    EnsembleFailure { point: String, failed: usize, total: usize },

    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("crossing undetermined: {0}")]
    CrossingUndetermined(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_location(location: &Option<usize>) -> String {
    location.map(|l| format!(", location {l}")).unwrap_or_default()
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// True for errors that stem from a bad plan or spec rather than from numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidSpec(_))
    }
}
