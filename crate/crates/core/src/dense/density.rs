use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermiticity_defect, kron, CMatrix, C64, ZERO};

use super::{bit_position, check_size, DenseState};

/// Density matrix of the whole chain in the dense basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    sites: usize,
    rho: CMatrix,
}

impl DensityMatrix {
    /// Wrap a matrix after checking Hermiticity, unit trace and positivity.
    pub fn new(sites: usize, rho: CMatrix) -> Result<Self> {
        check_size(sites)?;
        let d = 1usize << sites;
        if rho.shape() != (d, d) {
            return Err(Error::InvalidState(format!("density matrix must be {d}x{d}")));
        }
        let dm = DensityMatrix { sites, rho };
        dm.validate()?;
        Ok(dm)
    }

    pub(crate) fn new_unchecked(sites: usize, rho: CMatrix) -> Self {
        DensityMatrix { sites, rho }
    }

    pub fn from_pure(state: &DenseState) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        DensityMatrix { sites: state.sites, rho: &v * v.adjoint() }
    }

    pub fn maximally_mixed(sites: usize) -> Result<Self> {
        check_size(sites)?;
        let d = 1usize << sites;
        Ok(DensityMatrix { sites, rho: CMatrix::identity(d, d) / C64::new(d as f64, 0.0) })
    }

    /// Uniform mixture of all basis states with exactly `particles` fermions.
    pub fn maximally_mixed_sector(sites: usize, particles: usize) -> Result<Self> {
        check_size(sites)?;
        let d = 1usize << sites;
        let members: Vec<usize> = (0..d).filter(|x| x.count_ones() as usize == particles).collect();
        if members.is_empty() {
            return Err(Error::InvalidState(format!("no states with {particles} particles")));
        }
        let w = 1.0 / members.len() as f64;
        let mut rho = CMatrix::zeros(d, d);
        for x in members {
            rho[(x, x)] = C64::new(w, 0.0);
        }
        Ok(DensityMatrix { sites, rho })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.rho)
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> f64 {
        crate::observables::entropy_from_probabilities(&self.eigenvalues())
    }

    pub fn validate(&self) -> Result<()> {
        let herm = hermiticity_defect(&self.rho);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:.2e})")));
        }
        if (self.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {} != 1", self.trace())));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -1e-9 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.2e}")));
        }
        Ok(())
    }

    /// `ρ ⊗ σ`, with `self` on the leading sites.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        check_size(self.sites + other.sites)?;
        Ok(DensityMatrix { sites: self.sites + other.sites, rho: kron(&self.rho, &other.rho) })
    }

    /// Reduced state on the contiguous block `keep` of sites.
    pub fn partial_trace(&self, keep: Range<usize>) -> Result<DensityMatrix> {
        if keep.is_empty() || keep.end > self.sites {
            return Err(Error::InvalidState(format!("bad block {keep:?} for {} sites", self.sites)));
        }
        let kept = keep.len();
        let right = self.sites - keep.end;
        let left = keep.start;
        let dk = 1usize << kept;
        let mut out = CMatrix::zeros(dk, dk);
        for l in 0..1usize << left {
            for r in 0..1usize << right {
                let base = (l << (kept + right)) | r;
                for a in 0..dk {
                    let xa = base | (a << right);
                    for b in 0..dk {
                        out[(a, b)] += self.rho[(xa, base | (b << right))];
                    }
                }
            }
        }
        Ok(DensityMatrix { sites: kept, rho: out })
    }

    /// True when `ρ` has no coherences between different particle numbers.
    pub fn is_number_conserving(&self, tol: f64) -> bool {
        let d = self.rho.nrows();
        (0..d).all(|x| (0..d).all(|y| x.count_ones() == y.count_ones() || self.rho[(x, y)].norm() <= tol))
    }

    /// `C_ij = tr(ρ c†_i c_j)`.
    pub fn one_body_matrix(&self) -> CMatrix {
        let n = self.sites;
        let d = 1usize << n;
        let mut c = CMatrix::zeros(n, n);
        for i in 0..n {
            let mi = 1usize << bit_position(n, i);
            c[(i, i)] = (0..d).filter(|x| x & mi != 0).map(|x| self.rho[(x, x)]).sum();
            for j in i + 1..n {
                let pi = bit_position(n, i);
                let pj = bit_position(n, j);
                let mj = 1usize << pj;
                let between = ((1usize << pi) - 1) & !((1usize << (pj + 1)) - 1);
                let mut acc = ZERO;
                for x in (0..d).filter(|x| x & mi == 0 && x & mj != 0) {
                    let y = (x | mi) & !mj;
                    let term = self.rho[(x, y)];
                    if (x & between).count_ones() % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                c[(i, j)] = acc;
                c[(j, i)] = acc.conj();
            }
        }
        c
    }
}

/// `ρ_A` of the first `ell` sites of a pure state.
pub fn reduced_density_matrix(state: &DenseState, ell: usize) -> Result<DensityMatrix> {
    if ell == 0 || ell >= state.sites {
        return Err(Error::InvalidState(format!("subsystem size {ell} must be in 1..{}", state.sites)));
    }
    let rows = 1usize << ell;
    let cols = 1usize << (state.sites - ell);
    let m = CMatrix::from_row_slice(rows, cols, state.amplitudes());
    Ok(DensityMatrix { sites: ell, rho: &m * m.adjoint() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Backend;
    use crate::model::bond_gate;

    #[test]
    fn product_state_reduces_to_rank_one() {
        let s = DenseState::neel(5).unwrap();
        for ell in 1..5 {
            let r = reduced_density_matrix(&s, ell).unwrap();
            let ev = r.eigenvalues();
            assert!((ev.last().unwrap() - 1.0).abs() < 1e-15);
            assert!(ev[..ev.len() - 1].iter().all(|e| e.abs() < 1e-15));
        }
    }

    #[test]
    fn current_eigenstate_splits_maximally() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = DenseState::from_amplitudes(2, vec![ZERO, C64::new(r, 0.0), C64::new(0.0, -r), ZERO]).unwrap();
        let rho_a = reduced_density_matrix(&s, 1).unwrap();
        assert!((rho_a.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho_a.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(rho_a.matrix()[(0, 1)].norm() < 1e-15);
        assert!((rho_a.entropy() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn complementary_entropies_match() {
        let mut s = DenseState::neel(6).unwrap();
        let g = bond_gate(1.0, 0.7);
        for b in [0, 2, 4, 1, 3, 0, 2, 4] {
            s.apply_gate(b, &g).unwrap();
        }
        let full = DensityMatrix::from_pure(&s);
        for ell in 1..6 {
            let a = full.partial_trace(0..ell).unwrap().entropy();
            let b = full.partial_trace(ell..6).unwrap().entropy();
            assert!((a - b).abs() < 1e-10, "ell={ell}: {a} vs {b}");
            let direct = reduced_density_matrix(&s, ell).unwrap().entropy();
            assert!((a - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn one_body_matrix_matches_pure_state() {
        let mut s = DenseState::neel(4).unwrap();
        let g = bond_gate(0.5, 0.9);
        for b in [0, 2, 1, 0, 2] {
            s.apply_gate(b, &g).unwrap();
        }
        let from_pure = s.correlation_matrix();
        let from_rho = DensityMatrix::from_pure(&s).one_body_matrix();
        assert!(crate::linalg::max_abs_diff(&from_pure, &from_rho) < 1e-14);
    }

    #[test]
    fn sector_mixture_is_valid() {
        let rho = DensityMatrix::maximally_mixed_sector(4, 2).unwrap();
        rho.validate().unwrap();
        assert!((rho.entropy() - 6f64.ln()).abs() < 1e-12);
        assert!(rho.is_number_conserving(0.0));
    }
}
