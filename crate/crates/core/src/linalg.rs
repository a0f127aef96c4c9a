//! Small dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` dynamic matrices of `Complex64`. The dimensions
//! involved are tiny (N ≤ ~16), so clarity wins over blocking or reuse of
//! workspaces.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative Hermiticity tolerance: defect ≤ `HERMITIAN_RTOL · (1 + ‖H‖_max)`.
pub const HERMITIAN_RTOL: f64 = 1e-12;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Max-entry norm of `H − H†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

pub fn is_hermitian(m: &CMatrix) -> bool {
    m.is_square() && hermiticity_defect(m) <= HERMITIAN_RTOL * (1.0 + max_abs(m))
}

/// Max-entry norm of `U†U − I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// Principal value in (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// `⟨a|b⟩`, conjugate-linear in the first argument.
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.dotc(b)
}

/// Rotate `v` so its largest-magnitude entry is real and positive.
///
/// Ties (within 1e-12) resolve to the lowest index.
pub fn normalize_phase(v: &mut CVector) {
    let max = v.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max - 1e-12)
        .expect("non-empty vector");
    let phase = v[pivot] / v[pivot].norm();
    let rot = phase.conj();
    v.iter_mut().for_each(|z| *z *= rot);
    // remove round-off imaginary part on the pivot
    v[pivot] = c(v[pivot].re, 0.0);
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Energies ascend; eigenvectors are the columns of the returned matrix,
/// each phase-normalized with [`normalize_phase`].
pub fn eigh(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !h.is_square() {
        return Err(Error::Kernel(format!(
            "matrix is {}x{}, expected square",
            h.nrows(),
            h.ncols()
        )));
    }
    if !is_hermitian(h) {
        return Err(Error::Kernel(format!(
            "input not Hermitian (defect {:.3e})",
            hermiticity_defect(h)
        )));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Kernel("non-finite matrix entry".into()));
    }
    let n = h.nrows();
    // symmetrize so the solver (which reads one triangle) sees an exact Hermitian
    let sym = (h + h.adjoint()) * c(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v: CVector = eig.eigenvectors.column(i).into_owned();
        let norm = v.norm();
        v /= c(norm, 0.0);
        normalize_phase(&mut v);
        vectors.set_column(col, &v);
    }
    Ok((energies, vectors))
}

/// `exp(−i·h·dt)` for Hermitian `h`, by spectral decomposition.
pub fn expm_hermitian(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    let (energies, v) = eigh(h)?;
    let n = h.nrows();
    let mut scaled = v.clone();
    for (j, e) in energies.iter().enumerate() {
        let f = Complex64::from_polar(1.0, -e * dt);
        for i in 0..n {
            scaled[(i, j)] *= f;
        }
    }
    Ok(scaled * v.adjoint())
}

/// Project onto the unitary group by modified Gram–Schmidt on the columns.
pub fn orthonormalize_columns(u: &CMatrix) -> CMatrix {
    let mut q = u.clone();
    let n = q.ncols();
    for j in 0..n {
        for i in 0..j {
            let qi: CVector = q.column(i).into_owned();
            let proj = qi.dotc(&q.column(j));
            let mut col = q.column_mut(j);
            col -= qi * proj;
        }
        let norm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    q
}
