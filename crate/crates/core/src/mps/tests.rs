use super::*;
use crate::linalg::max_abs_diff;
use crate::model::{bond_gate, current_projectors, occupation_projectors};
use crate::testutil::{random_state, random_unitary, rng};

fn fidelity(a: &DenseState, b: &DenseState) -> f64 {
    a.overlap(b).norm_sqr()
}

#[test]
fn product_state_contracts_to_dense() {
    let m = MpsState::neel(6, TruncationPolicy::default()).unwrap();
    let d = DenseState::neel(6).unwrap();
    assert!((fidelity(&m.to_dense().unwrap(), &d) - 1.0).abs() < 1e-15);
    assert_eq!(m.bond_dimensions(), vec![1; 5]);
}

#[test]
fn from_dense_round_trip() {
    let mut r = rng(1);
    let d = random_state(&mut r, 7);
    let m = MpsState::from_dense(&d, TruncationPolicy::exact()).unwrap();
    assert!((fidelity(&m.to_dense().unwrap(), &d) - 1.0).abs() < 1e-12);
    assert_eq!(m.bond_dimensions(), vec![2, 4, 8, 8, 4, 2]);
}

#[test]
fn random_circuit_matches_dense() {
    let mut r = rng(2);
    let policy = TruncationPolicy::default().with_cutoff(1e-12);
    let mut m = MpsState::neel(8, policy).unwrap();
    let mut d = DenseState::neel(8).unwrap();
    for layer in 0..6 {
        for b in (layer % 2..7).step_by(2) {
            let u = random_unitary(&mut r, 4);
            m.apply_gate(b, &u).unwrap();
            d.apply_gate(b, &u).unwrap();
        }
    }
    assert!(fidelity(&m.to_dense().unwrap(), &d) > 1.0 - 1e-8);
    assert!(max_abs_diff(&m.correlation_matrix(), &d.correlation_matrix()) < 1e-8);
}

#[test]
fn unordered_gates_match_dense() {
    let mut r = rng(3);
    let mut m = MpsState::neel(6, TruncationPolicy::exact()).unwrap();
    let mut d = DenseState::neel(6).unwrap();
    for b in [4, 0, 2, 3, 1, 4, 0] {
        let u = random_unitary(&mut r, 4);
        m.apply_gate(b, &u).unwrap();
        d.apply_gate(b, &u).unwrap();
    }
    assert!(fidelity(&m.to_dense().unwrap(), &d) > 1.0 - 1e-12);
}

#[test]
fn projections_match_dense() {
    let mut r = rng(4);
    let d0 = random_state(&mut r, 6);
    for (set, location) in [(occupation_projectors(), 2), (current_projectors(), 3), (current_projectors(), 0)] {
        for outcome in 0..set.len() {
            let mut m = MpsState::from_dense(&d0, TruncationPolicy::exact()).unwrap();
            let mut d = d0.clone();
            let pm = m.outcome_probabilities(location, &set).unwrap();
            let pd = d.outcome_probabilities(location, &set).unwrap();
            assert!(pm.iter().zip(&pd).all(|(a, b)| (a - b).abs() < 1e-12));
            let qm = m.collapse(location, &set, outcome).unwrap();
            let qd = d.collapse(location, &set, outcome).unwrap();
            assert!((qm - qd).abs() < 1e-12);
            assert!((m.norm() - 1.0).abs() < 1e-12);
            assert!(fidelity(&m.to_dense().unwrap(), &d) > 1.0 - 1e-12);
        }
    }
}

#[test]
fn degenerate_projection_rejected() {
    let mut m = MpsState::neel(4, TruncationPolicy::default()).unwrap();
    let set = occupation_projectors();
    assert!(matches!(m.collapse(0, &set, 0), Err(Error::DegenerateProjection { .. })));
}

#[test]
fn schmidt_values_match_dense() {
    let mut r = rng(5);
    let d = random_state(&mut r, 8);
    let mut m = MpsState::from_dense(&d, TruncationPolicy::exact()).unwrap();
    for bond in [3, 0, 6, 2] {
        let s = m.schmidt_spectrum(bond).unwrap();
        let mut p = d.schmidt_probabilities(bond + 1);
        p.sort_by(|a, b| b.total_cmp(a));
        for (k, x) in s.iter().enumerate() {
            assert!((x * x - p[k]).abs() < 1e-12);
        }
        assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let em = m.entropy_profile();
    let ed = d.clone().entropy_profile();
    assert!(em.iter().zip(&ed).all(|(a, b)| (a - b).abs() < 1e-10));
}

#[test]
fn correlation_matrix_matches_dense_for_generic_state() {
    let mut r = rng(6);
    let mut d = random_state(&mut r, 7);
    let mut m = MpsState::from_dense(&d, TruncationPolicy::exact()).unwrap();
    let cm = m.correlation_matrix();
    assert!(max_abs_diff(&cm, &d.correlation_matrix()) < 1e-12);
    assert!((m.string_correlator(5, 1).unwrap() - cm[(5, 1)]).norm() < 1e-12);
}

#[test]
fn bond_dimension_respects_cap() {
    let policy = TruncationPolicy { chi_max: 3, svd_cutoff: 0.0, hard_limit: 1.0 };
    let mut r = rng(7);
    let mut m = MpsState::neel(8, policy).unwrap();
    for layer in 0..8 {
        for b in (layer % 2..7).step_by(2) {
            m.apply_gate(b, &random_unitary(&mut r, 4)).unwrap();
        }
    }
    assert!(m.max_bond_dimension() <= 3);
    assert!(m.truncation_error() > 0.0);
    assert!((m.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn hard_limit_reports_failure() {
    let policy = TruncationPolicy { chi_max: 1, svd_cutoff: 1e-10, hard_limit: 1e-4 };
    let mut m = MpsState::neel(4, policy).unwrap();
    let err = m.apply_gate(1, &bond_gate(0.0, 1.0)).unwrap_err();
    assert!(matches!(err, Error::TruncationFailure { bond: 1, chi_max: 1, .. }));
}

#[test]
fn truncation_keeps_degenerate_partners() {
    // two numerically equal values straddle the cutoff
    let eps: f64 = 1e-13;
    let s = [0.5f64.sqrt(), (0.25 + eps).sqrt(), (0.25 - eps).sqrt()];
    let policy = TruncationPolicy { chi_max: 10, svd_cutoff: 0.25, hard_limit: 1.0 };
    let (keep, discarded) = policy.keep(&s);
    assert_eq!(keep, 3);
    assert_eq!(discarded, 0.0);
    let capped = TruncationPolicy { chi_max: 2, ..policy };
    assert_eq!(capped.keep(&s).0, 2);
}

#[test]
fn truncation_basic_counts() {
    let policy = TruncationPolicy { chi_max: 2, svd_cutoff: 1e-3, hard_limit: 1.0 };
    let (keep, discarded) = policy.keep(&[0.9, 0.4, 0.1, 0.01]);
    assert_eq!(keep, 2);
    let total = 0.81 + 0.16 + 0.01 + 0.0001;
    assert!((discarded - 0.0101 / total).abs() < 1e-15);
    let (keep, _) = TruncationPolicy::default().keep(&[1.0, 1e-7]);
    assert_eq!(keep, 1);
}

#[test]
fn snapshot_round_trip() {
    let mut r = rng(8);
    let mut m = MpsState::neel(6, TruncationPolicy::default()).unwrap();
    for b in [0, 2, 4, 1, 3] {
        m.apply_gate(b, &random_unitary(&mut r, 4)).unwrap();
    }
    let mut buf = Vec::new();
    write_snapshot(&m, &mut buf).unwrap();
    let loaded = read_snapshot(buf.as_slice(), TruncationPolicy::default()).unwrap();
    assert_eq!(loaded.bond_dimensions(), m.bond_dimensions());
    assert!(fidelity(&loaded.to_dense().unwrap(), &m.to_dense().unwrap()) > 1.0 - 1e-12);
    buf[0] = 9;
    assert!(matches!(read_snapshot(buf.as_slice(), TruncationPolicy::default()), Err(Error::Format(_))));
}

#[test]
fn to_dense_size_limit() {
    let m = MpsState::neel(14, TruncationPolicy::default()).unwrap();
    assert!(matches!(m.to_dense(), Err(Error::TooLarge { .. })));
}
