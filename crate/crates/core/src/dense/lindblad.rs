//! Unconditional (outcome-averaged) dynamics:
//! `dρ/dt = -i[H, ρ] + γ Σ_loc Σ_q (Π_q ρ Π_q - {Π_q, ρ}/2)`.
//!
//! Because every projector set is complete, the dissipator per location
//! simplifies to `γ (Σ_q Π_q ρ Π_q - ρ)`.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::model::{hamiltonian_bond_matrix, ChainSpec, ProjectorSet};

use super::{apply_local_strided, DensityMatrix, MAX_DENSE_SITES};

/// Largest chain the integrator accepts.
pub const MAX_LINDBLAD_SITES: usize = 8;

struct Liouvillian {
    sites: usize,
    bonds: Vec<CMatrix>,
    gamma: f64,
    projectors: ProjectorSet,
    locations: usize,
}

impl Liouvillian {
    fn new(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        if spec.sites > MAX_LINDBLAD_SITES.min(MAX_DENSE_SITES) {
            return Err(Error::TooLarge { sites: spec.sites, limit: MAX_LINDBLAD_SITES });
        }
        let bonds = (0..spec.sites - 1)
            .map(|b| hamiltonian_bond_matrix(spec, b).map(|h| h.into_matrix()))
            .collect::<Result<_>>()?;
        Ok(Liouvillian {
            sites: spec.sites,
            bonds,
            gamma: spec.gamma,
            projectors: spec.observable.projectors(),
            locations: spec.locations(),
        })
    }

    fn left(&self, m: &CMatrix, first: usize, op: &CMatrix) -> CMatrix {
        let n = m.nrows();
        let mut out = m.clone();
        let data = out.as_mut_slice();
        for col in 0..n {
            apply_local_strided(data, col * n, 1, self.sites, first, op);
        }
        out
    }

    fn right(&self, m: &CMatrix, first: usize, op: &CMatrix) -> CMatrix {
        let n = m.nrows();
        let opt = op.transpose();
        let mut out = m.clone();
        let data = out.as_mut_slice();
        for row in 0..n {
            apply_local_strided(data, row, n, self.sites, first, &opt);
        }
        out
    }

    fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for (b, h) in self.bonds.iter().enumerate() {
            let comm = self.left(rho, b, h) - self.right(rho, b, h);
            out += comm * C64::new(0.0, -1.0);
        }
        if self.gamma > 0.0 {
            for loc in 0..self.locations {
                let mut sandwiched = CMatrix::zeros(rho.nrows(), rho.ncols());
                for o in &self.projectors.outcomes {
                    let p = o.projector.matrix();
                    sandwiched += self.right(&self.left(rho, loc, p), loc, p);
                }
                out += (sandwiched - rho) * C64::new(self.gamma, 0.0);
            }
        }
        out
    }
}

/// Time derivative of `rho` under the monitored chain's Lindblad equation.
pub fn lindblad_rhs(rho: &DensityMatrix, spec: &ChainSpec) -> Result<CMatrix> {
    let l = Liouvillian::new(spec)?;
    if rho.sites() != spec.sites {
        return Err(Error::InvalidState("density matrix size does not match the chain".into()));
    }
    Ok(l.rhs(rho.matrix()))
}

/// Integrate the Lindblad equation to time `t` with fixed-step RK4.
///
/// The step is the largest `h ≤ spec.dt` dividing `t` evenly. Trace drift
/// above `1e-6` is reported as [`Error::IntegrationDrift`].
pub fn lindblad_evolve(rho0: &DensityMatrix, spec: &ChainSpec, t: f64) -> Result<DensityMatrix> {
    let l = Liouvillian::new(spec)?;
    if rho0.sites() != spec.sites {
        return Err(Error::InvalidState("density matrix size does not match the chain".into()));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidSpec(format!("integration time must be non-negative, got {t}")));
    }
    let steps = (t / spec.dt).ceil().max(0.0) as usize;
    let mut rho = rho0.matrix().clone();
    if steps > 0 {
        let h = t / steps as f64;
        let half = C64::new(h / 2.0, 0.0);
        let full = C64::new(h, 0.0);
        let sixth = C64::new(h / 6.0, 0.0);
        for _ in 0..steps {
            let k1 = l.rhs(&rho);
            let k2 = l.rhs(&(&rho + &k1 * half));
            let k3 = l.rhs(&(&rho + &k2 * half));
            let k4 = l.rhs(&(&rho + &k3 * full));
            rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * sixth;
        }
    }
    let drift = (rho.trace().re - rho0.trace()).abs();
    if drift > 1e-6 {
        return Err(Error::IntegrationDrift { drift });
    }
    // restore exact Hermiticity lost to rounding
    let rho = crate::linalg::hermitian_part(&rho);
    Ok(DensityMatrix::new_unchecked(spec.sites, rho))
}
