//! Free-fermion backend: a Slater determinant tracked through its correlation
//! matrix `C_kl = <c†_k c_l>`.
//!
//! Only number-conserving quadratic gates and occupation measurements keep the
//! state Gaussian, so anything else is rejected.

use crate::backend::{select_outcome, Backend, BackendKind, DEGENERATE_PROB};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, hermitian_eigenvalues, max_abs_diff, CMatrix, C64, ONE, ZERO};
use crate::model::{LocalOperator, ObservableKind, ProjectorSet};
use crate::observables::binary_entropy;

/// Outcomes below this probability are replaced by their complement when sampling.
const RESAMPLE_PROB: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    c: CMatrix,
}

impl GaussianState {
    pub fn from_occupations(pattern: &[u8]) -> Self {
        let diag = nalgebra::DVector::from_iterator(pattern.len(), pattern.iter().map(|&n| if n != 0 { ONE } else { ZERO }));
        GaussianState { c: CMatrix::from_diagonal(&diag) }
    }

    pub fn neel(sites: usize) -> Self {
        Self::from_occupations(&crate::model::InitialState::Neel.occupations(sites))
    }

    /// Wrap a correlation matrix; it must be Hermitian and idempotent.
    pub fn from_matrix(c: CMatrix) -> Result<Self> {
        if c.nrows() != c.ncols() || c.nrows() < 1 {
            return Err(Error::InvalidState("correlation matrix must be square".into()));
        }
        if crate::linalg::hermiticity_defect(&c) > 1e-10 {
            return Err(Error::InvalidState("correlation matrix is not Hermitian".into()));
        }
        let state = GaussianState { c };
        let defect = state.purity_check();
        if defect > 1e-8 {
            return Err(Error::InvalidState(format!("not a pure Gaussian state (|C²-C| = {defect:.2e})")));
        }
        Ok(state)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.c
    }

    pub fn particle_number(&self) -> f64 {
        self.c.trace().re
    }

    /// `max |C² - C|`, zero for a pure Gaussian state.
    pub fn purity_check(&self) -> f64 {
        max_abs_diff(&(&self.c * &self.c), &self.c)
    }

    /// Exact free evolution for time `t` under the uniform hopping chain.
    ///
    /// With `u = exp(-i h t)` the correlation matrix becomes `conj(u) C uᵀ`.
    pub fn propagate(&mut self, interaction: f64, t: f64) -> Result<()> {
        if interaction != 0.0 {
            return Err(Error::Unsupported(format!("Gaussian propagation needs U = 0, got U = {interaction}")));
        }
        let n = self.c.nrows();
        let h = CMatrix::from_fn(n, n, |k, l| if k.abs_diff(l) == 1 { C64::new(-0.5, 0.0) } else { ZERO });
        let u = expm_hermitian(&h, C64::new(0.0, -t));
        self.c = u.map(|z| z.conj()) * &self.c * u.transpose();
        Ok(())
    }

    /// Rotate the single-particle modes `bond, bond + 1` by the 2x2 unitary `u`.
    pub fn apply_single_particle(&mut self, bond: usize, u: &[[C64; 2]; 2]) -> Result<()> {
        let n = self.c.nrows();
        if bond + 1 >= n {
            return Err(Error::BondOutOfRange { bond, sites: n });
        }
        let (a, b) = (bond, bond + 1);
        for col in 0..n {
            let (x, y) = (self.c[(a, col)], self.c[(b, col)]);
            self.c[(a, col)] = u[0][0].conj() * x + u[0][1].conj() * y;
            self.c[(b, col)] = u[1][0].conj() * x + u[1][1].conj() * y;
        }
        for row in 0..n {
            let (x, y) = (self.c[(row, a)], self.c[(row, b)]);
            self.c[(row, a)] = x * u[0][0] + y * u[0][1];
            self.c[(row, b)] = x * u[1][0] + y * u[1][1];
        }
        Ok(())
    }

    /// Sample `n_j` with a uniform draw and project. Returns the outcome (0 or 1).
    ///
    /// An outcome with probability below `1e-12` is replaced by its complement.
    pub fn measure_occupation(&mut self, site: usize, draw: f64) -> Result<(u8, f64)> {
        let probs = self.occupation_probabilities(site)?;
        let mut outcome = select_outcome(&probs, draw);
        if probs[outcome] < RESAMPLE_PROB {
            outcome = 1 - outcome;
        }
        let p = self.project_occupation(site, outcome as u8)?;
        Ok((outcome as u8, p))
    }

    fn occupation_probabilities(&self, site: usize) -> Result<[f64; 2]> {
        let n = self.c.nrows();
        if site >= n {
            return Err(Error::SiteOutOfRange { site, sites: n });
        }
        let occ = self.c[(site, site)].re;
        if !(-1e-10..=1.0 + 1e-10).contains(&occ) {
            return Err(Error::InvalidState(format!("occupation {occ} of site {site} outside [0, 1]")));
        }
        let occ = occ.clamp(0.0, 1.0);
        Ok([1.0 - occ, occ])
    }

    /// Project site `site` on occupation `outcome`; returns the Born probability.
    pub fn project_occupation(&mut self, site: usize, outcome: u8) -> Result<f64> {
        let [p0, p1] = self.occupation_probabilities(site)?;
        let n = self.c.nrows();
        let j = site;
        let (prob, sign, denom) = if outcome == 1 { (p1, -1.0, p1) } else { (p0, 1.0, p0) };
        if prob < DEGENERATE_PROB {
            return Err(Error::DegenerateProjection { prob });
        }
        let col: Vec<C64> = (0..n).map(|k| self.c[(k, j)]).collect();
        let row: Vec<C64> = (0..n).map(|l| self.c[(j, l)]).collect();
        let factor = C64::new(sign / denom, 0.0);
        for k in 0..n {
            for l in 0..n {
                if k != j && l != j {
                    self.c[(k, l)] += col[k] * row[l] * factor;
                }
            }
        }
        for k in 0..n {
            self.c[(k, j)] = ZERO;
            self.c[(j, k)] = ZERO;
        }
        self.c[(j, j)] = if outcome == 1 { ONE } else { ZERO };
        Ok(prob)
    }

    /// Single-particle unitary encoded by a number-conserving two-site gate, if it is Gaussian.
    fn single_particle_block(gate: &LocalOperator) -> Result<[[C64; 2]; 2]> {
        let g = gate.matrix();
        if g.nrows() != 4 {
            return Err(Error::OperatorShape { expected: 4, rows: g.nrows(), cols: g.ncols() });
        }
        gate.ensure_unitary()?;
        let sectors = [0usize, 1, 1, 2];
        for r in 0..4 {
            for c in 0..4 {
                if sectors[r] != sectors[c] && g[(r, c)].norm() > 1e-12 {
                    return Err(Error::Unsupported("gate does not conserve particle number".into()));
                }
            }
        }
        let phase = g[(0, 0)];
        // basis index 2 is |10> (particle on the left site), index 1 is |01>
        let block = [[g[(2, 2)], g[(2, 1)]], [g[(1, 2)], g[(1, 1)]]];
        let det = block[0][0] * block[1][1] - block[0][1] * block[1][0];
        if (g[(3, 3)] * phase - det).norm() > 1e-12 {
            return Err(Error::Unsupported("interacting gate cannot act on a Gaussian state".into()));
        }
        let inv = phase.conj();
        Ok(block.map(|r| r.map(|z| z * inv)))
    }
}

impl Backend for GaussianState {
    fn kind(&self) -> BackendKind {
        BackendKind::Gaussian
    }

    fn sites(&self) -> usize {
        self.c.nrows()
    }

    fn apply_gate(&mut self, bond: usize, gate: &LocalOperator) -> Result<()> {
        let u = Self::single_particle_block(gate)?;
        self.apply_single_particle(bond, &u)
    }

    fn outcome_probabilities(&mut self, location: usize, set: &ProjectorSet) -> Result<Vec<f64>> {
        ensure_occupation(set)?;
        Ok(self.occupation_probabilities(location)?.to_vec())
    }

    fn collapse(&mut self, location: usize, set: &ProjectorSet, outcome: usize) -> Result<f64> {
        ensure_occupation(set)?;
        self.project_occupation(location, outcome as u8)
    }

    fn measure(&mut self, location: usize, set: &ProjectorSet, draw: f64) -> Result<(usize, f64)> {
        ensure_occupation(set)?;
        let (outcome, p) = self.measure_occupation(location, draw)?;
        Ok((outcome as usize, p))
    }

    fn entropy_profile(&mut self) -> Vec<f64> {
        let n = self.c.nrows();
        (1..n)
            .map(|ell| {
                let block = self.c.view((0, 0), (ell, ell)).into_owned();
                hermitian_eigenvalues(&block).into_iter().map(binary_entropy).sum()
            })
            .collect()
    }

    fn correlation_matrix(&mut self) -> CMatrix {
        self.c.clone()
    }
}

fn ensure_occupation(set: &ProjectorSet) -> Result<()> {
    if set.kind != ObservableKind::Occupation {
        return Err(Error::Unsupported(format!(
            "{} measurements leave the Gaussian manifold",
            set.kind
        )));
    }
    Ok(())
}
