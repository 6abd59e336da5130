//! Matrix-product-state backend for TEBD with projective measurements.
//!
//! The chain is kept in mixed canonical form: tensors left of the
//! orthogonality center are left-isometries, tensors right of it are
//! right-isometries, and the center tensor carries the norm. Every two-site
//! operation first brings the center onto the bond, so Born probabilities are
//! norms of a single local tensor and Schmidt values come out of the same SVD
//! that re-splits it.
//!
//! Tensors are stored row-major as `[left][physical][right]`.

mod snapshot;

pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_VERSION};

use crate::backend::{Backend, BackendKind, DEGENERATE_PROB};
use crate::dense::DenseState;
use crate::error::{Error, Result};
use crate::linalg::{svd, CMatrix, C64, ONE, ZERO};
use crate::model::{number_operator, pauli_z, sigma_minus, sigma_plus, LocalOperator, ProjectorSet};
use crate::observables::entropy_from_probabilities;

/// Largest chain [`MpsState::to_dense`] will contract.
pub const MAX_TO_DENSE_SITES: usize = 12;

/// Relative tolerance under which Schmidt values count as degenerate.
const TIE_TOLERANCE: f64 = 1e-10;

/// Bond-dimension and discarded-weight control for SVD truncation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationPolicy {
    pub chi_max: usize,
    /// Squared Schmidt values (normalized) at or below this are discarded.
    pub svd_cutoff: f64,
    /// A bond capped at `chi_max` that discards more weight than this fails.
    pub hard_limit: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { chi_max: 256, svd_cutoff: 1e-10, hard_limit: 1e-4 }
    }
}

impl TruncationPolicy {
    /// Keeps every non-zero Schmidt value.
    pub fn exact() -> Self {
        TruncationPolicy { chi_max: usize::MAX, svd_cutoff: 0.0, hard_limit: 1.0 }
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.svd_cutoff = cutoff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi_max < 1 {
            return Err(Error::config("truncation.chi_max", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.svd_cutoff) {
            return Err(Error::config("truncation.svd_cutoff", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Number of singular values to keep and the discarded (relative) weight.
    fn keep(&self, s: &[f64]) -> (usize, f64) {
        let total: f64 = s.iter().map(|x| x * x).sum();
        if total <= 0.0 {
            return (1, 0.0);
        }
        let mut keep = s.iter().take_while(|&&x| x * x / total > self.svd_cutoff).count().max(1);
        // keep degenerate partners of the last retained value
        while keep < s.len() && (s[keep - 1] - s[keep]).abs() <= TIE_TOLERANCE * s[0] {
            keep += 1;
        }
        keep = keep.min(self.chi_max).min(s.len());
        let discarded = s[keep..].iter().map(|x| x * x).sum::<f64>() / total;
        (keep, discarded)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SiteTensor {
    pub(crate) left: usize,
    pub(crate) right: usize,
    pub(crate) data: Vec<C64>,
}

impl SiteTensor {
    fn product(n: u8) -> Self {
        let mut data = vec![ZERO; 2];
        data[usize::from(n != 0)] = ONE;
        SiteTensor { left: 1, right: 1, data }
    }

    #[inline]
    fn at(&self, a: usize, s: usize, b: usize) -> C64 {
        self.data[(a * 2 + s) * self.right + b]
    }

    /// `(left·2) × right` view.
    fn left_matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(self.left * 2, self.right, &self.data)
    }

    /// `left × (2·right)` view.
    fn right_matrix(&self) -> CMatrix {
        CMatrix::from_row_slice(self.left, 2 * self.right, &self.data)
    }

    fn from_left_matrix(m: &CMatrix) -> Self {
        let right = m.ncols();
        SiteTensor { left: m.nrows() / 2, right, data: row_major(m) }
    }

    fn from_right_matrix(m: &CMatrix) -> Self {
        SiteTensor { left: m.nrows(), right: m.ncols() / 2, data: row_major(m) }
    }

    /// Slice `T[:, s, :]` as a `left × right` matrix.
    fn physical_slice(&self, s: usize) -> CMatrix {
        CMatrix::from_fn(self.left, self.right, |a, b| self.at(a, s, b))
    }

    fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    fn apply_physical(&mut self, op: &CMatrix) {
        for a in 0..self.left {
            for b in 0..self.right {
                let x0 = self.at(a, 0, b);
                let x1 = self.at(a, 1, b);
                self.data[(a * 2) * self.right + b] = op[(0, 0)] * x0 + op[(0, 1)] * x1;
                self.data[(a * 2 + 1) * self.right + b] = op[(1, 0)] * x0 + op[(1, 1)] * x1;
            }
        }
    }
}

fn row_major(m: &CMatrix) -> Vec<C64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Two-site tensor `θ[a, s1, s2, c]` held as a `(left·2) × (2·right)` matrix.
struct TwoSite {
    left: usize,
    right: usize,
    theta: CMatrix,
}

impl TwoSite {
    fn apply(&mut self, op: &CMatrix) {
        let r = self.right;
        for a in 0..self.left {
            for c in 0..r {
                let mut v = [ZERO; 4];
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        v[s1 * 2 + s2] = self.theta[(a * 2 + s1, s2 * r + c)];
                    }
                }
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        let row = s1 * 2 + s2;
                        let val = op[(row, 0)] * v[0] + op[(row, 1)] * v[1] + op[(row, 2)] * v[2] + op[(row, 3)] * v[3];
                        self.theta[(a * 2 + s1, s2 * r + c)] = val;
                    }
                }
            }
        }
    }

    fn density(&self) -> CMatrix {
        let r = self.right;
        let mut rho = CMatrix::zeros(4, 4);
        for a in 0..self.left {
            for c in 0..r {
                let mut v = [ZERO; 4];
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        v[s1 * 2 + s2] = self.theta[(a * 2 + s1, s2 * r + c)];
                    }
                }
                for x in 0..4 {
                    for y in 0..4 {
                        rho[(x, y)] += v[x] * v[y].conj();
                    }
                }
            }
        }
        rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CenterSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    tensors: Vec<SiteTensor>,
    center: usize,
    /// Schmidt values per bond, `None` when stale.
    schmidt: Vec<Option<Vec<f64>>>,
    policy: TruncationPolicy,
    discarded: f64,
}

impl MpsState {
    /// Product state with the given occupations; bond dimension 1 everywhere.
    pub fn from_product_state(pattern: &[u8], policy: TruncationPolicy) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::InvalidSpec("empty chain".into()));
        }
        policy.validate()?;
        Ok(MpsState {
            tensors: pattern.iter().map(|&n| SiteTensor::product(n)).collect(),
            center: 0,
            schmidt: vec![Some(vec![1.0]); pattern.len() - 1],
            policy,
            discarded: 0.0,
        })
    }

    pub fn neel(sites: usize, policy: TruncationPolicy) -> Result<Self> {
        Self::from_product_state(&crate::model::InitialState::Neel.occupations(sites), policy)
    }

    /// Exact decomposition of a dense state by successive SVDs.
    pub fn from_dense(state: &DenseState, policy: TruncationPolicy) -> Result<Self> {
        policy.validate()?;
        let sites = state.sites();
        let mut tensors = Vec::with_capacity(sites);
        let mut schmidt = Vec::with_capacity(sites - 1);
        let mut rest = CMatrix::from_row_slice(1, 1 << sites, state.amplitudes());
        for site in 0..sites - 1 {
            let left = rest.nrows();
            let cols = rest.ncols() / 2;
            // regroup (left, s | tail) -> (left·2) × tail
            let m = CMatrix::from_fn(left * 2, cols, |r, c| rest[(r / 2, (r % 2) * cols + c)]);
            let (u, s, vt) = svd(m);
            let (keep, _) = policy.keep(&s);
            let norm = s[..keep].iter().map(|x| x * x).sum::<f64>().sqrt();
            tensors.push(SiteTensor::from_left_matrix(&u.columns(0, keep).into_owned()));
            schmidt.push(Some(s[..keep].iter().map(|x| x / norm).collect()));
            let sv = CMatrix::from_fn(keep, vt.ncols(), |r, c| vt[(r, c)] * (s[r] / norm));
            rest = sv;
            let _ = site;
        }
        let last = SiteTensor { left: rest.nrows(), right: 1, data: row_major(&rest) };
        tensors.push(last);
        Ok(MpsState { tensors, center: sites - 1, schmidt, policy, discarded: 0.0 })
    }

    pub fn sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn set_policy(&mut self, policy: TruncationPolicy) -> Result<()> {
        policy.validate()?;
        self.policy = policy;
        Ok(())
    }

    pub fn center(&self) -> usize {
        self.center
    }

    /// Accumulated discarded weight over all truncations so far.
    pub fn truncation_error(&self) -> f64 {
        self.discarded
    }

    /// Bond dimensions between neighbouring sites.
    pub fn bond_dimensions(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.right).collect()
    }

    pub fn max_bond_dimension(&self) -> usize {
        self.bond_dimensions().into_iter().max().unwrap_or(1)
    }

    pub(crate) fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    pub(crate) fn from_tensors(tensors: Vec<SiteTensor>, policy: TruncationPolicy) -> Result<Self> {
        let sites = tensors.len();
        if sites == 0 {
            return Err(Error::Format("MPS without sites".into()));
        }
        let mut state = MpsState { tensors, center: sites - 1, schmidt: vec![None; sites - 1], policy, discarded: 0.0 };
        // sweep to the left to restore canonical form, then normalize the center
        state.move_center_to(0);
        let norm = state.tensors[0].norm_sqr().sqrt();
        if norm < 1e-300 {
            return Err(Error::InvalidState("MPS has zero norm".into()));
        }
        state.tensors[0].data.iter_mut().for_each(|z| *z /= norm);
        state.schmidt.iter_mut().for_each(|s| *s = None);
        Ok(state)
    }

    fn check_bond(&self, bond: usize) -> Result<()> {
        if bond + 1 >= self.sites() {
            return Err(Error::BondOutOfRange { bond, sites: self.sites() });
        }
        Ok(())
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.sites() {
            return Err(Error::SiteOutOfRange { site, sites: self.sites() });
        }
        Ok(())
    }

    fn move_right(&mut self) {
        let j = self.center;
        let (u, s, vt) = svd(self.tensors[j].left_matrix());
        let (keep, _) = self.policy.keep(&s);
        let norm = s[..keep].iter().map(|x| x * x).sum::<f64>().sqrt();
        let sv = CMatrix::from_fn(keep, vt.ncols(), |r, c| vt[(r, c)] * s[r]);
        self.tensors[j] = SiteTensor::from_left_matrix(&u.columns(0, keep).into_owned());
        let next = sv * self.tensors[j + 1].right_matrix();
        self.tensors[j + 1] = SiteTensor::from_right_matrix(&next);
        self.schmidt[j] = Some(s[..keep].iter().map(|x| x / norm).collect());
        self.center = j + 1;
    }

    fn move_left(&mut self) {
        let j = self.center;
        let (u, s, vt) = svd(self.tensors[j].right_matrix());
        let (keep, _) = self.policy.keep(&s);
        let norm = s[..keep].iter().map(|x| x * x).sum::<f64>().sqrt();
        let us = CMatrix::from_fn(u.nrows(), keep, |r, c| u[(r, c)] * s[c]);
        self.tensors[j] = SiteTensor::from_right_matrix(&vt.rows(0, keep).into_owned());
        let prev = self.tensors[j - 1].left_matrix() * us;
        self.tensors[j - 1] = SiteTensor::from_left_matrix(&prev);
        self.schmidt[j - 1] = Some(s[..keep].iter().map(|x| x / norm).collect());
        self.center = j - 1;
    }

    fn move_center_to(&mut self, target: usize) {
        while self.center < target {
            self.move_right();
        }
        while self.center > target {
            self.move_left();
        }
    }

    /// Bring the center onto `bond` (site `bond` or `bond + 1`) and merge the pair.
    fn two_site(&mut self, bond: usize) -> TwoSite {
        if self.center < bond {
            self.move_center_to(bond);
        } else if self.center > bond + 1 {
            self.move_center_to(bond + 1);
        }
        let a = &self.tensors[bond];
        let b = &self.tensors[bond + 1];
        TwoSite { left: a.left, right: b.right, theta: a.left_matrix() * b.right_matrix() }
    }

    /// Split a two-site tensor back with truncation; returns the discarded weight.
    fn split(&mut self, bond: usize, two: TwoSite, side: CenterSide) -> Result<f64> {
        let (u, s, vt) = svd(two.theta);
        let (keep, discarded) = self.policy.keep(&s);
        if keep == self.policy.chi_max && discarded > self.policy.hard_limit {
            return Err(Error::TruncationFailure { bond, discarded, chi_max: self.policy.chi_max });
        }
        let norm = s[..keep].iter().map(|x| x * x).sum::<f64>().sqrt();
        let lambda: Vec<f64> = s[..keep].iter().map(|x| x / norm).collect();
        match side {
            CenterSide::Right => {
                self.tensors[bond] = SiteTensor::from_left_matrix(&u.columns(0, keep).into_owned());
                let sv = CMatrix::from_fn(keep, vt.ncols(), |r, c| vt[(r, c)] * lambda[r]);
                self.tensors[bond + 1] = SiteTensor::from_right_matrix(&sv);
                self.center = bond + 1;
            }
            CenterSide::Left => {
                let us = CMatrix::from_fn(u.nrows(), keep, |r, c| u[(r, c)] * lambda[c]);
                self.tensors[bond] = SiteTensor::from_left_matrix(&us);
                self.tensors[bond + 1] = SiteTensor::from_right_matrix(&vt.rows(0, keep).into_owned());
                self.center = bond;
            }
        }
        self.schmidt[bond] = Some(lambda);
        self.discarded += discarded;
        Ok(discarded)
    }

    fn side_for(&self, bond: usize) -> CenterSide {
        if self.center > bond {
            CenterSide::Left
        } else {
            CenterSide::Right
        }
    }

    /// TEBD update on `bond`: contract, apply the unitary, re-split with the
    /// given policy. Returns the discarded weight of this update.
    pub fn apply_two_site_gate(&mut self, bond: usize, gate: &LocalOperator, policy: &TruncationPolicy) -> Result<f64> {
        self.check_bond(bond)?;
        if gate.support() != 2 {
            return Err(Error::OperatorShape { expected: 4, rows: 2, cols: 2 });
        }
        gate.ensure_unitary()?;
        let saved = std::mem::replace(&mut self.policy, *policy);
        let side = self.side_for(bond);
        let mut two = self.two_site(bond);
        two.apply(gate.matrix());
        let result = self.split(bond, two, side);
        self.policy = saved;
        result
    }

    /// Apply a one- or two-site projector at `location` and renormalize.
    /// Returns the Born probability `<Π>`.
    pub fn apply_projector(&mut self, location: usize, projector: &LocalOperator) -> Result<f64> {
        match projector.support() {
            1 => {
                self.check_site(location)?;
                self.move_center_to(location);
                let mut t = self.tensors[location].clone();
                t.apply_physical(projector.matrix());
                let prob = t.norm_sqr();
                if prob < DEGENERATE_PROB {
                    return Err(Error::DegenerateProjection { prob });
                }
                let norm = prob.sqrt();
                t.data.iter_mut().for_each(|z| *z /= norm);
                self.tensors[location] = t;
                self.schmidt.iter_mut().for_each(|s| *s = None);
                Ok(prob)
            }
            _ => {
                self.check_bond(location)?;
                let side = self.side_for(location);
                let mut two = self.two_site(location);
                two.apply(projector.matrix());
                let prob: f64 = two.theta.iter().map(|z| z.norm_sqr()).sum();
                if prob < DEGENERATE_PROB {
                    return Err(Error::DegenerateProjection { prob });
                }
                two.theta /= C64::new(prob.sqrt(), 0.0);
                self.schmidt.iter_mut().for_each(|s| *s = None);
                self.split(location, two, side)?;
                Ok(prob)
            }
        }
    }

    /// Reduced density matrix of one site or one bond.
    pub fn local_density(&mut self, first_site: usize, support: usize) -> Result<CMatrix> {
        if support == 1 {
            self.check_site(first_site)?;
            self.move_center_to(first_site);
            let t = &self.tensors[first_site];
            let mut rho = CMatrix::zeros(2, 2);
            for a in 0..t.left {
                for b in 0..t.right {
                    for s in 0..2 {
                        for sp in 0..2 {
                            rho[(s, sp)] += t.at(a, s, b) * t.at(a, sp, b).conj();
                        }
                    }
                }
            }
            Ok(rho)
        } else {
            self.check_bond(first_site)?;
            Ok(self.two_site(first_site).density())
        }
    }

    /// Schmidt values (descending, unit 2-norm) across `bond`.
    pub fn schmidt_spectrum(&mut self, bond: usize) -> Result<Vec<f64>> {
        self.check_bond(bond)?;
        if let Some(s) = &self.schmidt[bond] {
            return Ok(s.clone());
        }
        if self.center <= bond {
            self.move_center_to(bond);
            self.move_right();
        } else {
            self.move_center_to(bond + 1);
            self.move_left();
        }
        Ok(self.schmidt[bond].clone().expect("set by the center move"))
    }

    /// Transfer `E'[b,b'] = Σ E[a,a'] T[a,s,b] op[s',s] conj(T[a',s',b'])`.
    fn transfer(env: &CMatrix, t: &SiteTensor, op: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(t.right, t.right);
        for s in 0..2 {
            for sp in 0..2 {
                let w = op[(sp, s)];
                if w == ZERO {
                    continue;
                }
                let ms = t.physical_slice(s);
                let msp = t.physical_slice(sp);
                out += (ms.transpose() * env * msp.map(|z| z.conj())) * w;
            }
        }
        out
    }

    /// `<c†_i c_j>` with the full `σ^z` string between the two sites.
    pub fn string_correlator(&mut self, i: usize, j: usize) -> Result<C64> {
        self.check_site(i)?;
        self.check_site(j)?;
        if i > j {
            return Ok(self.string_correlator(j, i)?.conj());
        }
        self.move_center_to(0);
        let id = CMatrix::identity(2, 2);
        let mut env = CMatrix::identity(1, 1);
        for t in &self.tensors[..i] {
            env = Self::transfer(&env, t, &id);
        }
        if i == j {
            return Ok(Self::transfer(&env, &self.tensors[i], &number_operator()).trace());
        }
        env = Self::transfer(&env, &self.tensors[i], &sigma_minus());
        let z = pauli_z();
        for t in &self.tensors[i + 1..j] {
            env = Self::transfer(&env, t, &z);
        }
        Ok(Self::transfer(&env, &self.tensors[j], &sigma_plus()).trace())
    }

    /// Full one-body matrix in `O(L² χ³)`.
    pub fn correlation_matrix(&mut self) -> CMatrix {
        let n = self.sites();
        self.move_center_to(0);
        let id = CMatrix::identity(2, 2);
        let z = pauli_z();
        let nop = number_operator();
        let minus = sigma_minus();
        let plus = sigma_plus();
        let mut c = CMatrix::zeros(n, n);
        let mut left = CMatrix::identity(1, 1);
        for i in 0..n {
            let t = &self.tensors[i];
            c[(i, i)] = Self::transfer(&left, t, &nop).trace();
            let mut env = Self::transfer(&left, t, &minus);
            for j in i + 1..n {
                let tj = &self.tensors[j];
                let v = Self::transfer(&env, tj, &plus).trace();
                c[(i, j)] = v;
                c[(j, i)] = v.conj();
                if j + 1 < n {
                    env = Self::transfer(&env, tj, &z);
                }
            }
            left = Self::transfer(&left, t, &id);
        }
        c
    }

    /// Contract into a dense statevector.
    pub fn to_dense(&self) -> Result<DenseState> {
        let sites = self.sites();
        if sites > MAX_TO_DENSE_SITES {
            return Err(Error::TooLarge { sites, limit: MAX_TO_DENSE_SITES });
        }
        // psi[x][bond], x enumerates the physical configuration so far
        let mut psi = vec![ONE];
        let mut bond = 1usize;
        for t in &self.tensors {
            let configs = psi.len() / bond;
            let mut next = vec![ZERO; configs * 2 * t.right];
            for x in 0..configs {
                for a in 0..bond {
                    let amp = psi[x * bond + a];
                    if amp == ZERO {
                        continue;
                    }
                    for s in 0..2 {
                        for b in 0..t.right {
                            next[((x * 2 + s) * t.right) + b] += amp * t.at(a, s, b);
                        }
                    }
                }
            }
            psi = next;
            bond = t.right;
        }
        DenseState::from_amplitudes(sites, psi)
    }

    pub fn norm(&self) -> f64 {
        self.tensors[self.center].norm_sqr().sqrt()
    }
}

impl Backend for MpsState {
    fn kind(&self) -> BackendKind {
        BackendKind::Mps
    }

    fn sites(&self) -> usize {
        self.tensors.len()
    }

    fn apply_gate(&mut self, bond: usize, gate: &LocalOperator) -> Result<()> {
        let policy = self.policy;
        self.apply_two_site_gate(bond, gate, &policy).map(|_| ())
    }

    fn apply_layer(&mut self, gates: &[(usize, LocalOperator)]) -> Result<()> {
        let Some(first) = gates.iter().map(|g| g.0).min() else {
            return Ok(());
        };
        let last = gates.iter().map(|g| g.0).max().unwrap_or(first);
        // sweep away from whichever end the center is closer to
        if self.center.abs_diff(first) <= self.center.abs_diff(last + 1) {
            let mut sorted: Vec<_> = gates.iter().collect();
            sorted.sort_by_key(|g| g.0);
            for (bond, gate) in sorted {
                self.apply_gate(*bond, gate)?;
            }
        } else {
            let mut sorted: Vec<_> = gates.iter().collect();
            sorted.sort_by_key(|g| std::cmp::Reverse(g.0));
            for (bond, gate) in sorted {
                self.apply_gate(*bond, gate)?;
            }
        }
        Ok(())
    }

    fn outcome_probabilities(&mut self, location: usize, set: &ProjectorSet) -> Result<Vec<f64>> {
        let rho = self.local_density(location, set.support())?;
        Ok(set.probabilities(&rho))
    }

    fn collapse(&mut self, location: usize, set: &ProjectorSet, outcome: usize) -> Result<f64> {
        self.apply_projector(location, set.projector(outcome))
    }

    fn entropy_profile(&mut self) -> Vec<f64> {
        (0..self.sites() - 1)
            .map(|b| {
                let s = self.schmidt_spectrum(b).expect("bond in range");
                entropy_from_probabilities(&s.iter().map(|x| x * x).collect::<Vec<_>>())
            })
            .collect()
    }

    fn correlation_matrix(&mut self) -> CMatrix {
        MpsState::correlation_matrix(self)
    }
}

#[cfg(test)]
mod tests;
