//! The stochastic protocol: per step a second-order Trotter sweep, then each
//! location is triggered independently with probability `γ·dt`, and the
//! triggered locations are measured in a random order with Born sampling.
//!
//! Randomness per trajectory comes from a ChaCha8 stream keyed by
//! `(master_seed, index)`. Draw order within a step is fixed: one uniform per
//! location for triggering, the shuffle, then one uniform per measurement.

mod record;

pub use record::{read_record, write_record, RECORD_VERSION};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendKind};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{trotter_gates, ChainSpec, ObservableKind, ProjectorSet, TrotterGates};

/// Born probabilities recomputed during replay may drift this far before a
/// warning is logged.
pub const REPLAY_WARN: f64 = 1e-8;
/// Beyond this drift replay fails.
pub const REPLAY_FAIL: f64 = 1e-6;

const NUMBER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrajectorySeed {
    pub master: u64,
    pub index: u64,
}

impl TrajectorySeed {
    pub fn new(master: u64, index: u64) -> Self {
        TrajectorySeed { master, index }
    }

    /// Independent stream for this trajectory.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    /// Time between recorded snapshots.
    pub sampling_interval: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions { sampling_interval: 1.0 }
    }
}

impl TrajectoryOptions {
    /// Steps between snapshots, at least one.
    pub fn stride(&self, dt: f64) -> usize {
        ((self.sampling_interval / dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    /// 1-based step in which the measurement happened.
    pub step: usize,
    pub location: usize,
    pub observable: ObservableKind,
    /// Index into the observable's projector set.
    pub outcome: usize,
    pub label: String,
    pub born_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSnapshot {
    pub step: usize,
    pub time: f64,
    /// `S(ℓ)` for `ℓ = 1..L-1`.
    pub entropy: Vec<f64>,
    pub correlation: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub spec: ChainSpec,
    pub seed: TrajectorySeed,
    pub backend: BackendKind,
    pub sampling_interval: f64,
    pub events: Vec<MeasurementEvent>,
    pub snapshots: Vec<ObservableSnapshot>,
}

/// Rejects backend/spec combinations that cannot be simulated faithfully.
pub fn ensure_compatible(kind: BackendKind, spec: &ChainSpec) -> Result<()> {
    spec.validate()?;
    if kind == BackendKind::Gaussian {
        if spec.interaction != 0.0 {
            return Err(Error::Unsupported("the Gaussian backend requires U = 0".into()));
        }
        if spec.observable == ObservableKind::Current {
            return Err(Error::Unsupported("the Gaussian backend cannot measure currents".into()));
        }
    }
    Ok(())
}

/// Locations measured this step, in application order.
pub fn schedule_step<R: Rng + ?Sized>(rng: &mut R, spec: &ChainSpec) -> Vec<usize> {
    let p = spec.trigger_probability();
    let mut triggered: Vec<usize> = (0..spec.locations()).filter(|_| rng.random::<f64>() < p).collect();
    triggered.shuffle(rng);
    triggered
}

/// A trajectory in progress, advanced one step at a time.
pub struct Trajectory<B: Backend> {
    spec: ChainSpec,
    seed: TrajectorySeed,
    state: B,
    rng: ChaCha8Rng,
    gates: TrotterGates,
    projectors: ProjectorSet,
    step: usize,
    particles: f64,
    events: Vec<MeasurementEvent>,
}

impl<B: Backend> Trajectory<B> {
    pub fn new(spec: &ChainSpec, mut state: B, seed: &TrajectorySeed) -> Result<Self> {
        ensure_compatible(state.kind(), spec)?;
        if state.sites() != spec.sites {
            return Err(Error::InvalidState(format!(
                "state has {} sites, spec has {}",
                state.sites(),
                spec.sites
            )));
        }
        let particles = state.correlation_matrix().trace().re;
        Ok(Trajectory {
            spec: spec.clone(),
            seed: *seed,
            state,
            rng: seed.rng(),
            gates: trotter_gates(spec)?,
            projectors: spec.observable.projectors(),
            step: 0,
            particles,
            events: Vec::new(),
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.spec.dt
    }

    pub fn state(&self) -> &B {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut B {
        &mut self.state
    }

    pub fn events(&self) -> &[MeasurementEvent] {
        &self.events
    }

    /// One Trotter step followed by the scheduled measurements.
    pub fn advance(&mut self) -> Result<()> {
        self.step += 1;
        let step = self.step;
        for layer in self.gates.layers() {
            self.state
                .apply_layer(layer)
                .map_err(|e| Error::Trajectory { step, location: None, source: Box::new(e) })?;
        }
        for location in schedule_step(&mut self.rng, &self.spec) {
            let draw: f64 = self.rng.random();
            let (outcome, born_prob) = self
                .state
                .measure(location, &self.projectors, draw)
                .map_err(|e| Error::Trajectory { step, location: Some(location), source: Box::new(e) })?;
            self.events.push(MeasurementEvent {
                step,
                location,
                observable: self.spec.observable,
                outcome,
                label: self.projectors.outcomes[outcome].label.to_string(),
                born_prob,
            });
        }
        Ok(())
    }

    /// Entropy profile and one-body matrix of the current state.
    pub fn snapshot(&mut self) -> Result<ObservableSnapshot> {
        take_snapshot(&mut self.state, self.step, self.spec.dt, self.particles)
    }

    pub fn into_parts(self) -> (B, Vec<MeasurementEvent>) {
        (self.state, self.events)
    }

    pub fn seed(&self) -> TrajectorySeed {
        self.seed
    }
}

fn take_snapshot<B: Backend>(state: &mut B, step: usize, dt: f64, particles: f64) -> Result<ObservableSnapshot> {
    let correlation = state.correlation_matrix();
    let n = correlation.trace().re;
    if (n - particles).abs() > NUMBER_TOL {
        return Err(Error::Trajectory {
            step,
            location: None,
            source: Box::new(Error::InvalidState(format!("particle number drifted from {particles} to {n}"))),
        });
    }
    Ok(ObservableSnapshot { step, time: step as f64 * dt, entropy: state.entropy_profile(), correlation })
}

/// Run `spec.n_steps` steps from `state`, sampling observables at step 0 and
/// every `options.sampling_interval`.
pub fn run_trajectory<B: Backend>(
    spec: &ChainSpec,
    state: B,
    seed: &TrajectorySeed,
    options: &TrajectoryOptions,
) -> Result<TrajectoryRecord> {
    let backend = state.kind();
    let stride = options.stride(spec.dt);
    let mut traj = Trajectory::new(spec, state, seed)?;
    let mut snapshots = vec![traj.snapshot()?];
    for _ in 0..spec.n_steps {
        traj.advance()?;
        if traj.step() % stride == 0 {
            snapshots.push(traj.snapshot()?);
        }
    }
    Ok(TrajectoryRecord {
        spec: spec.clone(),
        seed: *seed,
        backend,
        sampling_interval: options.sampling_interval,
        events: traj.events,
        snapshots,
    })
}

/// Outcome of [`replay`]: the re-derived record and the largest Born
/// probability deviation from the logged values.
#[derive(Debug, Clone)]
pub struct Replay {
    pub record: TrajectoryRecord,
    pub max_deviation: f64,
}

/// Re-apply the logged outcomes of `record` to `state` without sampling.
pub fn replay<B: Backend>(record: &TrajectoryRecord, mut state: B) -> Result<Replay> {
    let spec = &record.spec;
    ensure_compatible(state.kind(), spec)?;
    if state.sites() != spec.sites {
        return Err(Error::InvalidState("replay state size does not match the record".into()));
    }
    let gates = trotter_gates(spec)?;
    let projectors = spec.observable.projectors();
    let stride = TrajectoryOptions { sampling_interval: record.sampling_interval }.stride(spec.dt);
    let particles = state.correlation_matrix().trace().re;
    let mut snapshots = vec![take_snapshot(&mut state, 0, spec.dt, particles)?];
    let mut events = Vec::with_capacity(record.events.len());
    let mut max_deviation: f64 = 0.0;
    let mut next = record.events.iter().peekable();
    for step in 1..=spec.n_steps {
        for layer in gates.layers() {
            state
                .apply_layer(layer)
                .map_err(|e| Error::Trajectory { step, location: None, source: Box::new(e) })?;
        }
        while let Some(event) = next.next_if(|e| e.step == step) {
            let wrap = |e| Error::Trajectory { step, location: Some(event.location), source: Box::new(e) };
            if event.outcome >= projectors.len() || event.observable != spec.observable {
                return Err(Error::Format(format!("event at step {step} does not fit the spec")));
            }
            let probs = state.outcome_probabilities(event.location, &projectors).map_err(wrap)?;
            let recomputed = probs[event.outcome];
            let deviation = (recomputed - event.born_prob).abs();
            if deviation > REPLAY_FAIL {
                return Err(Error::ReplayMismatch {
                    step,
                    location: event.location,
                    logged: event.born_prob,
                    recomputed,
                });
            }
            if deviation > REPLAY_WARN {
                log::warn!("replay drift {deviation:e} at step {step}, location {}", event.location);
            }
            max_deviation = max_deviation.max(deviation);
            let born_prob = state.collapse(event.location, &projectors, event.outcome).map_err(wrap)?;
            events.push(MeasurementEvent { born_prob, ..event.clone() });
        }
        if step % stride == 0 {
            snapshots.push(take_snapshot(&mut state, step, spec.dt, particles)?);
        }
    }
    if let Some(extra) = next.next() {
        return Err(Error::Format(format!("event at step {} lies beyond the run", extra.step)));
    }
    Ok(Replay {
        record: TrajectoryRecord {
            spec: spec.clone(),
            seed: record.seed,
            backend: state.kind(),
            sampling_interval: record.sampling_interval,
            events,
            snapshots,
        },
        max_deviation,
    })
}
