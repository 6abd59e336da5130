use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseState;
use crate::linalg::{expm_hermitian, hermitian_part, CMatrix, C64};
use crate::model::LocalOperator;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

pub(crate) fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> LocalOperator {
    let h = hermitian_part(&random_matrix(rng, n));
    LocalOperator::new(expm_hermitian(&h, C64::new(0.0, -3.0))).unwrap()
}

pub(crate) fn random_state(rng: &mut ChaCha8Rng, sites: usize) -> DenseState {
    let amps = (0..1usize << sites)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    DenseState::from_amplitudes(sites, amps).unwrap()
}
