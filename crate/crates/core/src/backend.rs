//! The interface every trajectory backend implements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{LocalOperator, ProjectorSet};

/// Outcomes whose Born probability falls below this are treated as impossible.
pub const DEGENERATE_PROB: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Dense,
    Gaussian,
    Mps,
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Dense => "dense",
            BackendKind::Gaussian => "gaussian",
            BackendKind::Mps => "mps",
        })
    }
}

/// A pure state of the chain that can be evolved by gates and collapsed by projectors.
///
/// Methods take `&mut self` even for read-only queries because the MPS
/// backend moves its orthogonality center to answer them; the physical state
/// is never altered by a query.
pub trait Backend: Clone + Send {
    fn kind(&self) -> BackendKind;

    fn sites(&self) -> usize;

    /// Apply a unitary two-site gate on `bond`.
    fn apply_gate(&mut self, bond: usize, gate: &LocalOperator) -> Result<()>;

    /// Apply a layer of gates on disjoint bonds.
    fn apply_layer(&mut self, gates: &[(usize, LocalOperator)]) -> Result<()> {
        for (bond, gate) in gates {
            self.apply_gate(*bond, gate)?;
        }
        Ok(())
    }

    /// Born probabilities of every outcome of `set` measured at `location`.
    fn outcome_probabilities(&mut self, location: usize, set: &ProjectorSet) -> Result<Vec<f64>>;

    /// Project on `outcome` and renormalize; returns the Born probability of that outcome.
    fn collapse(&mut self, location: usize, set: &ProjectorSet, outcome: usize) -> Result<f64>;

    /// Sample an outcome from the cumulative Born distribution with a uniform `draw`
    /// and collapse on it. Returns the outcome index and its probability.
    fn measure(&mut self, location: usize, set: &ProjectorSet, draw: f64) -> Result<(usize, f64)> {
        let probs = self.outcome_probabilities(location, set)?;
        let outcome = select_outcome(&probs, draw);
        if probs[outcome] < DEGENERATE_PROB {
            return Err(Error::DegenerateProjection { prob: probs[outcome] });
        }
        let p = self.collapse(location, set, outcome)?;
        Ok((outcome, p))
    }

    /// Entanglement entropies of the bipartitions `{0..ℓ} | {ℓ..L}` for `ℓ = 1..L-1`.
    fn entropy_profile(&mut self) -> Vec<f64>;

    /// One-body matrix `C_kl = <c†_k c_l>`.
    fn correlation_matrix(&mut self) -> CMatrix;
}

/// Index of the first outcome whose cumulative probability exceeds `draw`.
///
/// If rounding leaves `draw` above the total, the last outcome with non-zero
/// probability is returned.
pub fn select_outcome(probs: &[f64], draw: f64) -> usize {
    let mut cumulative = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        cumulative += p;
        if draw < cumulative {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_selection() {
        let p = [0.0, 0.5, 0.5];
        assert_eq!(select_outcome(&p, 0.0), 1);
        assert_eq!(select_outcome(&p, 0.25), 1);
        assert_eq!(select_outcome(&p, 0.5), 2);
        assert_eq!(select_outcome(&p, 0.999_999), 2);
        assert_eq!(select_outcome(&[0.3, 0.7 - 1e-16, 0.0], 0.999_999_999_999_999_9), 1);
    }
}
