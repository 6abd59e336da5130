//! The monitored chain: parameters, local operators in the spin (Jordan-Wigner)
//! representation, Trotter gates and measurement projectors.
//!
//! Every local matrix is written in the occupation basis `{|0>, |1>}` per site,
//! with `|n=0>` identified with spin up. Two-site matrices use the basis
//! `{|00>, |01>, |10>, |11>}`, the left label belonging to the lower site index.
//! Under this convention `c†_j c_{j+1}` acts on a bond as `|10><01|` and
//! `n_j = (1 - σ^z_j) / 2`.
//!
//! Sites and bonds are zero-based: bond `b` couples sites `b` and `b + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, hermiticity_defect, kron, unitarity_defect, CMatrix, C64, I, ONE, ZERO};

/// Default Trotter step in units of the inverse hopping.
pub const DEFAULT_DT: f64 = 0.05;

const OPERATOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    /// Local occupations `n_j`, measured on sites.
    Occupation,
    /// Bond currents `J_j`, measured on bonds.
    Current,
}

impl ObservableKind {
    /// Number of locations the observable can be measured at on a chain of `sites` sites.
    pub fn locations(self, sites: usize) -> usize {
        match self {
            ObservableKind::Occupation => sites,
            ObservableKind::Current => sites.saturating_sub(1),
        }
    }

    pub fn support(self) -> usize {
        match self {
            ObservableKind::Occupation => 1,
            ObservableKind::Current => 2,
        }
    }

    pub fn projectors(self) -> ProjectorSet {
        match self {
            ObservableKind::Occupation => occupation_projectors(),
            ObservableKind::Current => current_projectors(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObservableKind::Occupation => "occupation",
            ObservableKind::Current => "current",
        }
    }
}

impl std::fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Occupations `1, 0, 1, 0, ...` starting from site 0.
    #[default]
    Neel,
}

impl InitialState {
    pub fn occupations(self, sites: usize) -> Vec<u8> {
        match self {
            InitialState::Neel => (0..sites).map(|j| u8::from(j % 2 == 0)).collect(),
        }
    }
}

/// Physical and protocol parameters of one monitored chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Number of sites `L`.
    pub sites: usize,
    /// Nearest-neighbour interaction `U` in units of the hopping.
    pub interaction: f64,
    /// Measurement rate per site (or bond) per unit time.
    pub gamma: f64,
    pub observable: ObservableKind,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub initial_state: InitialState,
}

impl ChainSpec {
    pub fn new(sites: usize, interaction: f64, gamma: f64, observable: ObservableKind) -> Self {
        ChainSpec {
            sites,
            interaction,
            gamma,
            observable,
            dt: DEFAULT_DT,
            n_steps: 0,
            initial_state: InitialState::Neel,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = n_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 sites, got {}", self.sites)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidSpec(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !self.interaction.is_finite() {
            return Err(Error::InvalidSpec("interaction must be finite".into()));
        }
        if self.trigger_probability() > 1.0 + 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "gamma * dt = {} exceeds 1",
                self.trigger_probability()
            )));
        }
        Ok(())
    }

    /// Per-step probability `γ·dt` that a given location is measured.
    pub fn trigger_probability(&self) -> f64 {
        self.gamma * self.dt
    }

    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn locations(&self) -> usize {
        self.observable.locations(self.sites)
    }

    pub fn initial_occupations(&self) -> Vec<u8> {
        self.initial_state.occupations(self.sites)
    }
}

/// A 2x2 or 4x4 matrix acting on one site or on one bond.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperator {
    matrix: CMatrix,
}

impl LocalOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || !(rows == 2 || rows == 4) {
            return Err(Error::OperatorShape { expected: if rows > 2 { 4 } else { 2 }, rows, cols });
        }
        Ok(LocalOperator { matrix })
    }

    pub fn identity(support: usize) -> Self {
        let d = 1 << support;
        LocalOperator { matrix: CMatrix::identity(d, d) }
    }

    /// Number of sites the operator acts on (1 or 2).
    pub fn support(&self) -> usize {
        if self.matrix.nrows() == 2 {
            1
        } else {
            2
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        hermiticity_defect(&self.matrix) < OPERATOR_TOL
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_defect() < OPERATOR_TOL
    }

    pub(crate) fn ensure_unitary(&self) -> Result<()> {
        let deviation = self.unitarity_defect();
        if deviation < OPERATOR_TOL {
            Ok(())
        } else {
            Err(Error::NotUnitary { deviation })
        }
    }
}

/// One possible outcome of a projective measurement.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub label: &'static str,
    pub eigenvalue: f64,
    pub projector: LocalOperator,
}

/// Complete set of orthogonal projectors for one local observable.
#[derive(Debug, Clone)]
pub struct ProjectorSet {
    pub kind: ObservableKind,
    pub outcomes: Vec<Outcome>,
}

impl ProjectorSet {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn support(&self) -> usize {
        self.kind.support()
    }

    pub fn projector(&self, outcome: usize) -> &LocalOperator {
        &self.outcomes[outcome].projector
    }

    /// Born probabilities `tr(Π_q ρ)` given the local reduced density matrix.
    ///
    /// Values within `1e-12` below zero are clamped to zero.
    pub fn probabilities(&self, local_rho: &CMatrix) -> Vec<f64> {
        self.outcomes
            .iter()
            .map(|o| {
                let p = (o.projector.matrix() * local_rho).trace().re;
                if (-1e-12..0.0).contains(&p) {
                    0.0
                } else {
                    p
                }
            })
            .collect()
    }
}

// Single-site building blocks in the occupation basis.

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `σ^- = |1><0|`, the Jordan-Wigner image of `c†` up to its string.
pub fn sigma_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO])
}

/// `σ^+ = |0><1|`, the Jordan-Wigner image of `c` up to its string.
pub fn sigma_plus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

pub fn number_operator() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE])
}

/// Two-site particle number `n_j + n_{j+1}`.
pub fn bond_number_operator() -> CMatrix {
    let id = CMatrix::identity(2, 2);
    kron(&number_operator(), &id) + kron(&id, &number_operator())
}

/// Bond current `J_j = -i/2 (c†_j c_{j+1} - c†_{j+1} c_j)`.
pub fn current_operator() -> CMatrix {
    let hop = kron(&sigma_minus(), &sigma_plus());
    (&hop - hop.adjoint()) * C64::new(0.0, -0.5)
}

/// Two-site term `-1/2 (c†_j c_{j+1} + h.c.) + U n_j n_{j+1}`.
pub fn hamiltonian_bond_matrix(spec: &ChainSpec, bond: usize) -> Result<LocalOperator> {
    if spec.sites < 2 || bond + 1 >= spec.sites {
        return Err(Error::BondOutOfRange { bond, sites: spec.sites });
    }
    Ok(LocalOperator { matrix: bond_hamiltonian(spec.interaction) })
}

fn bond_hamiltonian(interaction: f64) -> CMatrix {
    let hop = kron(&sigma_minus(), &sigma_plus());
    let hopping = (&hop + hop.adjoint()) * C64::new(-0.5, 0.0);
    let density = kron(&number_operator(), &number_operator()) * C64::new(interaction, 0.0);
    hopping + density
}

/// `exp(-i h_bond τ)`.
pub fn bond_gate(interaction: f64, tau: f64) -> LocalOperator {
    LocalOperator { matrix: expm_hermitian(&bond_hamiltonian(interaction), C64::new(0.0, -tau)) }
}

/// Gates of one second-order even-odd Trotter step.
///
/// A step applies [`TrotterGates::half_layer`] (bonds `0, 2, 4, ...` for `dt/2`),
/// then [`TrotterGates::full_layer`] (bonds `1, 3, 5, ...` for `dt`), then the
/// half layer again. Gates within one layer act on disjoint bonds and commute.
#[derive(Debug, Clone)]
pub struct TrotterGates {
    pub half_layer: Vec<(usize, LocalOperator)>,
    pub full_layer: Vec<(usize, LocalOperator)>,
}

impl TrotterGates {
    /// The three layers of one step, in application order.
    pub fn layers(&self) -> [&[(usize, LocalOperator)]; 3] {
        [&self.half_layer, &self.full_layer, &self.half_layer]
    }
}

pub fn trotter_gates(spec: &ChainSpec) -> Result<TrotterGates> {
    spec.validate()?;
    let half = bond_gate(spec.interaction, spec.dt / 2.0);
    let full = bond_gate(spec.interaction, spec.dt);
    let bonds = spec.sites - 1;
    Ok(TrotterGates {
        half_layer: (0..bonds).step_by(2).map(|b| (b, half.clone())).collect(),
        full_layer: (1..bonds).step_by(2).map(|b| (b, full.clone())).collect(),
    })
}

/// `Π^{n=0} = (I + σ^z)/2`, `Π^{n=1} = (I - σ^z)/2`, in that order.
pub fn occupation_projectors() -> ProjectorSet {
    let id = CMatrix::identity(2, 2);
    let z = pauli_z();
    ProjectorSet {
        kind: ObservableKind::Occupation,
        outcomes: vec![
            Outcome { label: "n=0", eigenvalue: 0.0, projector: LocalOperator { matrix: (&id + &z).scale(0.5) } },
            Outcome { label: "n=1", eigenvalue: 1.0, projector: LocalOperator { matrix: (&id - &z).scale(0.5) } },
        ],
    }
}

/// Eigenprojectors of the bond current, ordered `J = 0, +1/2, -1/2`.
///
/// `Π^{J=0} = (I + ZZ)/2` has rank 2; `Π^{J=±1/2} = (I - ZZ ∓ YX ± XY)/4`
/// project on `(|01> ∓ i|10>)/√2`.
pub fn current_projectors() -> ProjectorSet {
    let id = CMatrix::identity(4, 4);
    let zz = kron(&pauli_z(), &pauli_z());
    let yx = kron(&pauli_y(), &pauli_x());
    let xy = kron(&pauli_x(), &pauli_y());
    let zero = (&id + &zz).scale(0.5);
    let plus = (&id - &zz - &yx + &xy).scale(0.25);
    let minus = (&id - &zz + &yx - &xy).scale(0.25);
    ProjectorSet {
        kind: ObservableKind::Current,
        outcomes: vec![
            Outcome { label: "J=0", eigenvalue: 0.0, projector: LocalOperator { matrix: zero } },
            Outcome { label: "J=+1/2", eigenvalue: 0.5, projector: LocalOperator { matrix: plus } },
            Outcome { label: "J=-1/2", eigenvalue: -0.5, projector: LocalOperator { matrix: minus } },
        ],
    }
}
