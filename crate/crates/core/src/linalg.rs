//! Small complex linear-algebra helpers shared by the estimation modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = hermitian_part(m);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Singular values of a complex matrix, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Least-squares solution of `A x = b` via thin QR.
///
/// Fails when `A` has (numerically) dependent columns.
pub fn least_squares(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::DimensionMismatch(format!(
            "least squares needs rows >= cols, got {rows}x{cols}"
        )));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().map(|d| d.norm()).fold(0.0, f64::max);
    let small = r.diagonal().iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min);
    if scale == 0.0 || small <= 1e-12 * scale {
        return Err(Error::Singular(format!(
            "rank-deficient least-squares system ({rows}x{cols})"
        )));
    }
    let qhb = qr.q().adjoint() * b;
    r.solve_upper_triangular(&qhb)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
