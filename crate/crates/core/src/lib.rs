//! Monitored free and interacting fermion chains.
//!
//! Quantum trajectories of a one-dimensional spinless-fermion chain evolving
//! under nearest-neighbour hopping and interaction, interrupted by random
//! projective measurements of either local occupation or bond current.
//! Three interchangeable state representations implement [`Backend`]:
//! a dense statevector, a fermionic Gaussian correlation matrix (free case,
//! occupation monitoring only) and a matrix product state.
//!
//! ```
//! use monitored_fermions::prelude::*;
//!
//! let spec = ChainSpec::new(6, 0.0, 0.5, ObservableKind::Occupation).with_steps(40);
//! let seed = TrajectorySeed::new(7, 0);
//! let record = run_trajectory(&spec, DenseState::neel(6)?, &seed, &TrajectoryOptions::default())?;
//! let last = record.snapshots.last().unwrap();
//! assert_eq!(last.entropy.len(), 5);
//! # Ok::<(), monitored_fermions::Error>(())
//! ```

pub mod backend;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod observables;
pub mod trajectory;

#[cfg(test)]
pub(crate) mod testutil;

pub use backend::{Backend, BackendKind};
pub use error::{Error, Result};

pub mod prelude {
    pub use crate::backend::{Backend, BackendKind};
    pub use crate::dense::{DenseState, DensityMatrix};
    pub use crate::error::{Error, Result};
    pub use crate::gaussian::GaussianState;
    pub use crate::model::{ChainSpec, InitialState, ObservableKind};
    pub use crate::mps::{MpsState, TruncationPolicy};
    pub use crate::observables::{cft_fit, gap, orbital_spectrum, total_ng, OrbitalSpectrum};
    pub use crate::trajectory::{replay, run_trajectory, TrajectoryOptions, TrajectoryRecord, TrajectorySeed};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/backends.md")]
    mod backends {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/observables.md")]
    mod observables {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
}
