//! Dense complex linear-algebra helpers shared across the crate.
//!
//! Blocks are stored as `nalgebra::DMatrix<Complex64>` in the J_z
//! eigenbasis with rows and columns ordered by descending magnetic
//! quantum number, so storage index `i` holds m with 2m = 2J - 2i.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type Cx = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

/// Eigenvalue magnitudes below this are treated as exact zeros when
/// accumulating trace norms; they are rounding debris from Hermitian
/// differences of nearly identical blocks.
pub const EIG_CLAMP: f64 = 1e-13;

/// Real trace of a Hermitian matrix.
pub fn trace_re(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Entries this many orders below the largest one are flushed to zero
/// before an eigensolve. Coherent blocks at large spin carry binomial
/// tails below 1e-180, and with that dynamic range in the matrix the
/// tridiagonal QL iteration produces NaNs (observed from dimension 601
/// upward; a 1e-100 cutoff still fails, 1e-80 is clean). Flushing at
/// 1e-60 perturbs eigenvalues by at most dim * max * 1e-60, far below
/// [`EIG_CLAMP`].
const EIG_FLUSH_RELATIVE: f64 = 1e-60;

/// Eigenvalues of a Hermitian matrix, unsorted.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return vec![0.0; m.nrows()];
    }
    let floor = scale * EIG_FLUSH_RELATIVE;
    let cleaned = m.map(|z| if z.norm() < floor { Cx::new(0.0, 0.0) } else { z });
    cleaned.symmetric_eigenvalues().as_slice().to_vec()
}

/// Trace norm of a Hermitian matrix via its eigenvalues, clamping
/// sub-[`EIG_CLAMP`] magnitudes to zero.
pub fn trace_norm_hermitian(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)
        .iter()
        .map(|&l| if l.abs() < EIG_CLAMP { 0.0 } else { l.abs() })
        .sum()
}

/// Largest entrywise absolute difference between two equally sized
/// matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of a Hermitian matrix (0 for an empty one).
pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitian_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// Widen a real matrix to complex storage.
pub fn complexify(m: &RMat) -> CMat {
    m.map(|x| Cx::new(x, 0.0))
}

/// Random PSD matrix with unit trace: `A A^dag / tr` for a matrix of
/// standard-normal-ish complex entries drawn from `rng`.
pub fn random_psd<R: Rng>(dim: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(dim, dim, |_, _| {
        Cx::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let mut m = &a * a.adjoint();
    let tr = trace_re(&m);
    m /= Cx::new(tr, 0.0);
    m
}
