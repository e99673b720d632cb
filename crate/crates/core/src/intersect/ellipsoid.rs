//! Confidence ellipsoids and the chi-square quantiles behind them.

use nalgebra::{Rotation3, SymmetricEigen};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};

fn chi_squared(k: u32) -> Result<ChiSquared> {
    if k == 0 {
        return Err(Error::InvalidInput("chi-square needs k ≥ 1".into()));
    }
    ChiSquared::new(k as f64).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Chi-square CDF with `k` degrees of freedom.
pub fn chi_square_cdf(k: u32, x: f64) -> f64 {
    chi_squared(k).map_or(f64::NAN, |d| d.cdf(x))
}

/// Chi-square quantile with `k` degrees of freedom.
pub fn chi_square_quantile(k: u32, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("chi-square quantile needs 0 < p < 1 (k={k}, p={p})")));
    }
    Ok(chi_squared(k)?.inverse_cdf(p))
}

/// Confidence ellipsoid of a 3-d Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEllipsoid {
    pub center: Vec3,
    /// Semi-axis lengths in descending order (m).
    pub semi_axes: [f64; 3],
    /// Columns are the axis directions, right-handed.
    pub orientation: Rotation3<f64>,
    pub confidence: f64,
    /// `χ²₃(confidence)`.
    pub chi_square: f64,
}

impl ErrorEllipsoid {
    /// Whether `x` lies inside, using the Mahalanobis distance under `cov`.
    pub fn contains(&self, x: &Vec3) -> bool {
        let local = self.orientation.inverse() * (x - self.center);
        let q: f64 = (0..3)
            .map(|i| {
                let a = self.semi_axes[i];
                if a > 0.0 {
                    (local[i] / a).powi(2)
                } else if local[i] == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .sum();
        q <= 1.0
    }
}

/// Ellipsoid with semi-axes `√(χ²₃(confidence)·λᵢ)` along the eigenvectors of `cov`.
pub fn error_ellipsoid(center: Vec3, cov: &Mat3, confidence: f64) -> Result<ErrorEllipsoid> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Covariance("covariance has non-finite entries".into()));
    }
    let chi2 = chi_square_quantile(3, confidence)?;
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let tol = 1e-10 * sym.trace().abs().max(f64::MIN_POSITIVE);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = [0.0; 3];
    let mut basis = Mat3::zeros();
    for (k, &i) in order.iter().enumerate() {
        let l = eig.eigenvalues[i];
        if l < -tol {
            return Err(Error::Covariance(format!("covariance has negative eigenvalue {l:e}")));
        }
        axes[k] = (chi2 * l.max(0.0)).sqrt();
        basis.set_column(k, &eig.eigenvectors.column(i));
    }
    if basis.determinant() < 0.0 {
        basis.set_column(2, &(-basis.column(2)));
    }
    Ok(ErrorEllipsoid {
        center,
        semi_axes: axes,
        orientation: Rotation3::from_matrix_unchecked(basis),
        confidence,
        chi_square: chi2,
    })
}
