//! Small dense complex linear-algebra helpers shared by every backend.

use nalgebra::DMatrix;
use ndarray::{s, Array2};
use ndarray_linalg::{Eigh, EigValsh, JobSvd, SVDDC, SVD, UPLO};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors in columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let (values, vectors) = to_array(&hermitian_part(m)).eigh(UPLO::Lower).expect("LAPACK zheev failed");
    (values.to_vec(), from_array(&vectors))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    to_array(&hermitian_part(m)).eigvalsh(UPLO::Lower).expect("LAPACK zheev failed").to_vec()
}

/// `exp(coeff * h)` for Hermitian `h`.
pub fn expm_hermitian(h: &CMatrix, coeff: C64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let phases = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&l| (coeff * l).exp()),
    ));
    &vectors * phases * vectors.adjoint()
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `max |M†M - I|` elementwise.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs_diff(&(m.adjoint() * m), &CMatrix::identity(n, n))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Thin SVD returning `(U, singular values descending, V†)`.
pub fn svd(m: CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let a = to_array(&m);
    let (u, s, vt) = match a.svddc(JobSvd::Some) {
        Ok(r) => r,
        Err(_) => {
            let (u, s, vt) = a.svd(true, true).expect("LAPACK zgesvd failed");
            let k = s.len();
            let u = u.map(|u| u.slice_move(s![.., ..k]));
            let vt = vt.map(|v| v.slice_move(s![..k, ..]));
            (u, s, vt)
        }
    };
    (from_array(&u.expect("requested U")), s.to_vec(), from_array(&vt.expect("requested V†")))
}

/// Singular values, descending, of the `rows x cols` matrix stored row-major in `data`.
pub fn singular_values_row_major(rows: usize, cols: usize, data: &[C64]) -> Vec<f64> {
    let a = ndarray::ArrayView2::from_shape((rows, cols), data).expect("shape matches data length");
    let (_, s, _) = match a.svddc(JobSvd::None) {
        Ok(r) => r,
        Err(_) => a.svd(false, false).expect("LAPACK zgesvd failed"),
    };
    s.to_vec()
}

fn to_array(m: &CMatrix) -> Array2<C64> {
    Array2::from_shape_fn(m.shape(), |(i, j)| m[(i, j)])
}

fn from_array(a: &Array2<C64>) -> CMatrix {
    CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}
