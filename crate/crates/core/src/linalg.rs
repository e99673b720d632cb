//! Small dense linear-algebra helpers shared by the propagation code.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Checks the PSD invariant used throughout: min eigenvalue ≥ −tol·trace.
pub fn check_psd(m: &DMatrix<f64>, rel_tol: f64, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Covariance(format!("{what} is not square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Covariance(format!("{what} has non-finite entries")));
    }
    let trace = m.trace().abs();
    let lo = min_eigenvalue(m);
    if lo < -rel_tol * trace.max(f64::MIN_POSITIVE) {
        return Err(Error::Covariance(format!(
            "{what} is not positive semidefinite (min eigenvalue {lo:e}, trace {trace:e})"
        )));
    }
    Ok(())
}

/// Inverse of a symmetric PSD matrix with eigenvalues floored at
/// `max(1e-12, 1e-12·trace/dim)`.
pub fn floored_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 || !m.is_square() {
        return Err(Error::Covariance("empty or non-square covariance".into()));
    }
    check_psd(m, 1e-10, "ray covariance")?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let floor = (1e-12 * m.trace() / n as f64).max(1e-12);
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Covariance("regularized inverse is not finite".into()));
    }
    Ok(symmetrize(&inv))
}

/// Symmetric square-root factor `L` with `L Lᵀ = m`, built from the
/// eigen-decomposition. Slightly negative eigenvalues (round-off) are clamped to
/// zero; anything beyond `1e-10·trace` is rejected.
pub fn symmetric_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_psd(m, 1e-10, "pose covariance")?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn mat3_to_dmatrix(m: &Mat3) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

pub fn dmatrix_to_mat3(m: &DMatrix<f64>) -> Mat3 {
    Mat3::from_fn(|i, j| m[(i, j)])
}

/// Row-major flattening, used by the JSON reports.
pub fn mat3_row_major(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
    out
}

/// Unit vector orthogonal to `axis`, derived from a fixed reference so the
/// result is deterministic.
pub fn any_orthogonal(axis: &Vec3) -> Vec3 {
    let reference = if axis.z.abs() < 0.9 {
        Vec3::z()
    } else {
        Vec3::y()
    };
    reference.cross(axis).normalize()
}

/// Angle between two vectors, accurate for nearly parallel inputs.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}
