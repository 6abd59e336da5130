//! Diagnostics computed from snapshots: entanglement profiles, natural-orbital
//! spectra, non-Gaussianity, the occupation gap and the chord-length fit.
//!
//! All entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::dense::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, CMatrix};

/// Probabilities closer than this to 0 or 1 contribute nothing to an entropy.
pub const ENTROPY_CLIP: f64 = 1e-12;

const SPECTRUM_CLIP: f64 = 1e-9;
const SPECTRUM_HARD_LIMIT: f64 = 1e-6;

/// `-Σ p ln p` with `0 ln 0 = 0`.
pub fn entropy_from_probabilities(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > ENTROPY_CLIP && p < 1.0 - ENTROPY_CLIP)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Binary entropy `H2(ν) = -ν ln ν - (1-ν) ln(1-ν)`.
pub fn binary_entropy(nu: f64) -> f64 {
    if nu <= ENTROPY_CLIP || nu >= 1.0 - ENTROPY_CLIP {
        0.0
    } else {
        -nu * nu.ln() - (1.0 - nu) * (1.0 - nu).ln()
    }
}

/// Entanglement entropies `S(ℓ)` for `ℓ = 1..L-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile(pub Vec<f64>);

impl EntropyProfile {
    pub fn sites(&self) -> usize {
        self.0.len() + 1
    }

    /// `S(ℓ)` for `1 ≤ ℓ ≤ L-1`.
    pub fn at(&self, ell: usize) -> f64 {
        self.0[ell - 1]
    }
}

pub fn entropy_profile<B: Backend>(state: &mut B) -> EntropyProfile {
    EntropyProfile(state.entropy_profile())
}

pub fn one_body_matrix<B: Backend>(state: &mut B) -> CMatrix {
    state.correlation_matrix()
}

/// Sorted eigenvalues of the one-body matrix (natural-orbital occupations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalSpectrum {
    /// Occupations in descending order.
    pub nu: Vec<f64>,
    /// Particle number, `Σ ν` rounded to the nearest integer.
    pub particles: usize,
}

impl OrbitalSpectrum {
    pub fn from_occupations(mut nu: Vec<f64>) -> Self {
        nu.sort_by(|a, b| b.total_cmp(a));
        let particles = nu.iter().sum::<f64>().round().max(0.0) as usize;
        OrbitalSpectrum { nu, particles }
    }
}

/// Natural-orbital occupations of a Hermitian one-body matrix.
///
/// Eigenvalues up to `1e-9` outside `[0, 1]` are clipped; anything beyond
/// `1e-6` means the matrix is not a valid fermionic correlation matrix.
pub fn orbital_spectrum(c: &CMatrix) -> Result<OrbitalSpectrum> {
    let raw = hermitian_eigenvalues(c);
    let mut nu = Vec::with_capacity(raw.len());
    for v in raw {
        if v < -SPECTRUM_HARD_LIMIT || v > 1.0 + SPECTRUM_HARD_LIMIT {
            return Err(Error::InvalidState(format!("occupation {v} outside [0, 1]")));
        }
        nu.push(if v < 0.0 && v > -SPECTRUM_CLIP {
            0.0
        } else if v > 1.0 && v < 1.0 + SPECTRUM_CLIP {
            1.0
        } else {
            v
        });
    }
    Ok(OrbitalSpectrum::from_occupations(nu))
}

/// Total non-Gaussianity of a pure state, `Σ_α H2(ν_α)`.
pub fn total_ng(spectrum: &OrbitalSpectrum) -> f64 {
    spectrum.nu.iter().map(|&v| binary_entropy(v)).sum()
}

/// Non-Gaussianity `S(ρ_G) - S(ρ)` of a number-conserving density matrix.
pub fn ng_mixed(rho: &DensityMatrix) -> Result<f64> {
    if !rho.is_number_conserving(1e-10) {
        return Err(Error::Unsupported("density matrix mixes particle-number sectors".into()));
    }
    let spectrum = orbital_spectrum(&rho.one_body_matrix())?;
    Ok(total_ng(&spectrum) - rho.entropy())
}

/// Gap `ν_N - ν_{N+1}` across the Fermi index and its rescaled slope `Δν·L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub delta_nu: f64,
    pub slope: f64,
}

pub fn gap(spectrum: &OrbitalSpectrum) -> Result<GapStats> {
    let n = spectrum.particles;
    let l = spectrum.nu.len();
    if n == 0 || n >= l {
        return Err(Error::InvalidState(format!("gap needs 0 < N < L, got N = {n}, L = {l}")));
    }
    let delta_nu = spectrum.nu[n - 1] - spectrum.nu[n];
    Ok(GapStats { delta_nu, slope: delta_nu * l as f64 })
}

/// Least-squares fit `S(ℓ) = α ln x(ℓ) + s0` with chord length `x(ℓ) = (2L/π) sin(πℓ/L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CftFit {
    pub alpha: f64,
    pub s0: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn chord_length(ell: usize, sites: usize) -> f64 {
    let l = sites as f64;
    2.0 * l / std::f64::consts::PI * (std::f64::consts::PI * ell as f64 / l).sin()
}

/// Fit over `ℓ ∈ range` (inclusive); defaults to `2 ≤ ℓ ≤ L-2`.
pub fn cft_fit(
    profile: &EntropyProfile,
    sites: usize,
    range: Option<std::ops::RangeInclusive<usize>>,
) -> Result<CftFit> {
    let range = range.unwrap_or(2..=sites.saturating_sub(2));
    let points: Vec<(f64, f64)> = range
        .filter(|&ell| ell >= 1 && ell < sites && ell <= profile.0.len())
        .map(|ell| (chord_length(ell, sites).ln(), profile.at(ell)))
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let alpha = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let s0 = my - alpha * mx;
    let residual = (points.iter().map(|p| (p.1 - alpha * p.0 - s0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(CftFit { alpha, s0, residual })
}
