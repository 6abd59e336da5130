//! Exact statevector simulation, the reference every other backend is checked against.
//!
//! Amplitudes are indexed with site 0 as the most significant bit, so the
//! basis order matches a Kronecker product `site 0 ⊗ site 1 ⊗ ...`.

mod density;
mod lindblad;

pub use density::{reduced_density_matrix, DensityMatrix};
pub use lindblad::{lindblad_evolve, lindblad_rhs};

use crate::backend::{Backend, BackendKind, DEGENERATE_PROB};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};
use crate::model::{LocalOperator, ProjectorSet};
use crate::observables::entropy_from_probabilities;

/// Largest chain the dense backend accepts (64 Ki amplitudes).
pub const MAX_DENSE_SITES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    sites: usize,
    amps: Vec<C64>,
}

#[inline]
pub(crate) fn bit_position(sites: usize, site: usize) -> usize {
    sites - 1 - site
}

/// Apply a 2x2 or 4x4 operator to the sites starting at `first_site` of a
/// vector embedded in `data` at `offset` with stride `stride`.
pub(crate) fn apply_local_strided(
    data: &mut [C64],
    offset: usize,
    stride: usize,
    sites: usize,
    first_site: usize,
    op: &CMatrix,
) {
    let dim = 1usize << sites;
    match op.nrows() {
        2 => {
            let mask = 1usize << bit_position(sites, first_site);
            let m = [op[(0, 0)], op[(0, 1)], op[(1, 0)], op[(1, 1)]];
            for idx in (0..dim).filter(|i| i & mask == 0) {
                let (i0, i1) = (offset + idx * stride, offset + (idx | mask) * stride);
                let (a0, a1) = (data[i0], data[i1]);
                data[i0] = m[0] * a0 + m[1] * a1;
                data[i1] = m[2] * a0 + m[3] * a1;
            }
        }
        4 => {
            let hi = 1usize << bit_position(sites, first_site);
            let lo = hi >> 1;
            // nonzero entries of each row
            let rows: [Vec<(usize, C64)>; 4] =
                std::array::from_fn(|r| (0..4).filter(|&c| op[(r, c)] != ZERO).map(|c| (c, op[(r, c)])).collect());
            for idx in (0..dim).filter(|i| i & (hi | lo) == 0) {
                let ix = [idx, idx | lo, idx | hi, idx | hi | lo].map(|i| offset + i * stride);
                let a = ix.map(|i| data[i]);
                for (r, row) in rows.iter().enumerate() {
                    data[ix[r]] = row.iter().fold(ZERO, |acc, &(c, m)| acc + m * a[c]);
                }
            }
        }
        n => unreachable!("local operators are 2x2 or 4x4, got {n}"),
    }
}

impl DenseState {
    pub fn from_occupations(pattern: &[u8]) -> Result<Self> {
        let sites = pattern.len();
        check_size(sites)?;
        let index = pattern.iter().fold(0usize, |acc, &n| (acc << 1) | usize::from(n != 0));
        let mut amps = vec![ZERO; 1 << sites];
        amps[index] = C64::new(1.0, 0.0);
        Ok(DenseState { sites, amps })
    }

    pub fn neel(sites: usize) -> Result<Self> {
        Self::from_occupations(&crate::model::InitialState::Neel.occupations(sites))
    }

    /// Build from raw amplitudes, normalizing them.
    pub fn from_amplitudes(sites: usize, mut amps: Vec<C64>) -> Result<Self> {
        check_size(sites)?;
        if amps.len() != 1 << sites {
            return Err(Error::InvalidState(format!("expected {} amplitudes, got {}", 1 << sites, amps.len())));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite norm".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(DenseState { sites, amps })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &DenseState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn check_location(&self, first_site: usize, support: usize) -> Result<()> {
        if first_site + support > self.sites {
            return Err(if support == 2 {
                Error::BondOutOfRange { bond: first_site, sites: self.sites }
            } else {
                Error::SiteOutOfRange { site: first_site, sites: self.sites }
            });
        }
        Ok(())
    }

    /// Apply an arbitrary local operator without renormalizing.
    pub fn apply_local(&mut self, first_site: usize, op: &LocalOperator) -> Result<()> {
        self.check_location(first_site, op.support())?;
        apply_local_strided(&mut self.amps, 0, 1, self.sites, first_site, op.matrix());
        Ok(())
    }

    pub fn apply_two_site_unitary(&mut self, bond: usize, gate: &LocalOperator) -> Result<()> {
        if gate.support() != 2 {
            return Err(Error::OperatorShape { expected: 4, rows: 2, cols: 2 });
        }
        gate.ensure_unitary()?;
        self.apply_local(bond, gate)
    }

    /// Reduced density matrix of `support` consecutive sites starting at `first_site`.
    pub fn local_density(&self, first_site: usize, support: usize) -> Result<CMatrix> {
        self.check_location(first_site, support)?;
        let d = 1usize << support;
        let shift = self.sites - first_site - support;
        let local_mask = (d - 1) << shift;
        let mut rho = CMatrix::zeros(d, d);
        for rest in (0..self.amps.len()).filter(|i| i & local_mask == 0) {
            let v: Vec<C64> = (0..d).map(|a| self.amps[rest | (a << shift)]).collect();
            for a in 0..d {
                if v[a] == ZERO {
                    continue;
                }
                for b in 0..d {
                    rho[(a, b)] += v[a] * v[b].conj();
                }
            }
        }
        Ok(rho)
    }

    /// Expectation of `N = Σ n_j`.
    pub fn particle_number(&self) -> f64 {
        self.amps.iter().enumerate().map(|(i, a)| a.norm_sqr() * i.count_ones() as f64).sum()
    }

    /// `<c†_i c_j>` including the Jordan-Wigner string between the two sites.
    pub fn correlator(&self, i: usize, j: usize) -> C64 {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Equal => {
                let m = 1usize << bit_position(self.sites, i);
                C64::new(self.amps.iter().enumerate().filter(|(x, _)| x & m != 0).map(|(_, a)| a.norm_sqr()).sum(), 0.0)
            }
            Ordering::Greater => self.correlator(j, i).conj(),
            Ordering::Less => {
                let pi = bit_position(self.sites, i);
                let pj = bit_position(self.sites, j);
                let (mi, mj) = (1usize << pi, 1usize << pj);
                let between = ((1usize << pi) - 1) & !((1usize << (pj + 1)) - 1);
                let mut acc = ZERO;
                for (x, &ax) in self.amps.iter().enumerate() {
                    if x & mi != 0 || x & mj == 0 || ax == ZERO {
                        continue;
                    }
                    let y = (x | mi) & !mj;
                    let term = self.amps[y].conj() * ax;
                    if (x & between).count_ones() % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                acc
            }
        }
    }

    /// Singular values of the amplitude matrix split after `ell` sites, squared.
    pub fn schmidt_probabilities(&self, ell: usize) -> Vec<f64> {
        let rows = 1usize << ell;
        let cols = 1usize << (self.sites - ell);
        crate::linalg::singular_values_row_major(rows, cols, &self.amps).iter().map(|s| s * s).collect()
    }
}

fn check_size(sites: usize) -> Result<()> {
    if sites > MAX_DENSE_SITES {
        return Err(Error::TooLarge { sites, limit: MAX_DENSE_SITES });
    }
    if sites == 0 {
        return Err(Error::InvalidSpec("empty chain".into()));
    }
    Ok(())
}

impl Backend for DenseState {
    fn kind(&self) -> BackendKind {
        BackendKind::Dense
    }

    fn sites(&self) -> usize {
        self.sites
    }

    fn apply_gate(&mut self, bond: usize, gate: &LocalOperator) -> Result<()> {
        self.apply_two_site_unitary(bond, gate)
    }

    fn outcome_probabilities(&mut self, location: usize, set: &ProjectorSet) -> Result<Vec<f64>> {
        let rho = self.local_density(location, set.support())?;
        Ok(set.probabilities(&rho))
    }

    fn collapse(&mut self, location: usize, set: &ProjectorSet, outcome: usize) -> Result<f64> {
        self.apply_local(location, set.projector(outcome))?;
        let prob = self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
        if prob < DEGENERATE_PROB {
            return Err(Error::DegenerateProjection { prob });
        }
        let norm = prob.sqrt();
        self.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(prob)
    }

    fn entropy_profile(&mut self) -> Vec<f64> {
        (1..self.sites).map(|ell| entropy_from_probabilities(&self.schmidt_probabilities(ell))).collect()
    }

    fn correlation_matrix(&mut self) -> CMatrix {
        let n = self.sites;
        let mut c = CMatrix::zeros(n, n);
        for i in 0..n {
            c[(i, i)] = self.correlator(i, i);
            for j in i + 1..n {
                let v = self.correlator(i, j);
                c[(i, j)] = v;
                c[(j, i)] = v.conj();
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bond_gate, current_projectors, occupation_projectors};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn psi_plus() -> DenseState {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        DenseState::from_amplitudes(2, vec![ZERO, c(r, 0.0), c(0.0, -r), ZERO]).unwrap()
    }

    fn random_state(sites: usize, seed: &[f64]) -> DenseState {
        let amps = (0..1 << sites).map(|k| c(seed[(2 * k) % seed.len()] - 0.5, seed[(2 * k + 1) % seed.len()] - 0.5)).collect();
        DenseState::from_amplitudes(sites, amps).unwrap()
    }

    #[test]
    fn identity_gate_leaves_state() {
        let mut s = random_state(4, &[0.1, 0.7, 0.3, 0.9, 0.2, 0.5, 0.8]);
        let before = s.clone();
        s.apply_two_site_unitary(1, &LocalOperator::identity(2)).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn hopping_gate_on_single_particle() {
        for t in [0.1, 0.9, 2.5] {
            let mut s = DenseState::from_occupations(&[1, 0]).unwrap();
            s.apply_two_site_unitary(0, &bond_gate(0.0, t)).unwrap();
            let a = s.amplitudes();
            assert!((a[2] - c((t / 2.0).cos(), 0.0)).norm() < 1e-14);
            assert!((a[1] - c(0.0, (t / 2.0).sin())).norm() < 1e-14);
        }
    }

    #[test]
    fn successive_gates_compose() {
        let g1 = bond_gate(0.7, 0.3);
        let g2 = bond_gate(-0.4, 1.1);
        let product = LocalOperator::new(g2.matrix() * g1.matrix()).unwrap();
        let mut a = random_state(3, &[0.3, 0.1, 0.4, 0.1, 0.5, 0.9, 0.2, 0.6]);
        let mut b = a.clone();
        a.apply_two_site_unitary(1, &g1).unwrap();
        a.apply_two_site_unitary(1, &g2).unwrap();
        b.apply_two_site_unitary(1, &product).unwrap();
        assert!((a.overlap(&b).norm() - 1.0).abs() < 1e-12);
        assert!(a.amplitudes().iter().zip(b.amplitudes()).all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn non_unitary_gate_rejected() {
        let mut s = DenseState::neel(2).unwrap();
        let p = current_projectors().projector(0).clone();
        assert!(matches!(s.apply_two_site_unitary(0, &p), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn measuring_definite_site() {
        let mut s = DenseState::neel(4).unwrap();
        let before = s.clone();
        let (outcome, p) = s.measure(0, &occupation_projectors(), 0.73).unwrap();
        assert_eq!(outcome, 1);
        assert!((p - 1.0).abs() < 1e-15);
        assert_eq!(s, before);
    }

    #[test]
    fn current_measurement_on_single_particle() {
        let mut s = DenseState::from_occupations(&[1, 0]).unwrap();
        let set = current_projectors();
        let probs = s.outcome_probabilities(0, &set).unwrap();
        assert!((probs[0]).abs() < 1e-15 && (probs[1] - 0.5).abs() < 1e-15 && (probs[2] - 0.5).abs() < 1e-15);
        let (outcome, p) = s.measure(0, &set, 0.25).unwrap();
        assert_eq!(outcome, 1);
        assert!((p - 0.5).abs() < 1e-15);
        assert!((s.overlap(&psi_plus()).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn forced_impossible_outcome_is_degenerate() {
        let mut s = DenseState::neel(2).unwrap();
        let err = s.collapse(0, &occupation_projectors(), 0).unwrap_err();
        assert!(matches!(err, Error::DegenerateProjection { .. }));
    }

    #[test]
    fn psi_plus_correlator() {
        let mut s = psi_plus();
        let cm = s.correlation_matrix();
        assert!((cm[(0, 1)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((cm[(1, 0)] - c(0.0, -0.5)).norm() < 1e-15);
        assert!((cm[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn string_sign_between_sites() {
        // (|1 1 0> + |0 1 1>)/√2: moving the particle from site 2 to site 0
        // crosses the occupied site 1, so the correlator picks up a minus sign.
        let mut amps = vec![ZERO; 8];
        amps[0b110] = c(1.0, 0.0);
        amps[0b011] = c(1.0, 0.0);
        let s = DenseState::from_amplitudes(3, amps).unwrap();
        assert!((s.correlator(0, 2) - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let mut s = DenseState::neel(6).unwrap();
        assert!(s.entropy_profile().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn size_guard() {
        assert!(matches!(DenseState::neel(17), Err(Error::TooLarge { .. })));
    }

    proptest! {
        #[test]
        fn born_probabilities_sum_to_one(seed in proptest::collection::vec(0.0f64..1.0, 16..64), loc in 0usize..4) {
            let mut s = random_state(5, &seed);
            for set in [occupation_projectors(), current_projectors()] {
                let p = s.outcome_probabilities(loc, &set).unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn measurement_keeps_norm_and_number(seed in proptest::collection::vec(0.0f64..1.0, 16..64), draw in 0.0f64..1.0) {
            // start from a fixed-N state so that N is sharp
            let mut s = DenseState::neel(4).unwrap();
            let g = bond_gate(seed[0] * 2.0, seed[1] * 3.0);
            for b in [0, 1, 2, 1, 0] {
                s.apply_gate(b, &g).unwrap();
            }
            let n0 = s.particle_number();
            s.measure(1, &current_projectors(), draw).unwrap();
            s.measure(2, &occupation_projectors(), seed[2]).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
            prop_assert!((s.particle_number() - n0).abs() < 1e-10);
        }
    }
}
