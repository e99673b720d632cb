//! Classical geopositioning covariance `P = (Bᵀ W B)⁻¹`, `W = (B_p Σ_p B_pᵀ)⁻¹`.

use nalgebra::{Cholesky, DMatrix};

use super::RayBundle;
use crate::error::{Error, Result};
use crate::linalg::{check_psd, dmatrix_to_mat3, symmetrize, Mat3};
use crate::pose::{ray_displacement_jacobian_with_kappa, SatelliteState};

/// Inputs to [`mig_covariance`].
#[derive(Debug, Clone, PartialEq)]
pub struct MigInputs {
    /// Image-coordinate partials with respect to the ground point (`2n × 3`).
    pub b: DMatrix<f64>,
    /// Image-coordinate partials with respect to pose (`2n × 6n`).
    pub b_p: DMatrix<f64>,
    /// Pose covariance including `κ` (`6n × 6n`).
    pub sigma_p: DMatrix<f64>,
}

/// `P = (Bᵀ W B)⁻¹` with `W = (B_p Σ_p B_pᵀ)⁻¹`.
pub fn mig_covariance(b: &DMatrix<f64>, b_p: &DMatrix<f64>, sigma_p: &DMatrix<f64>) -> Result<Mat3> {
    let m = b.nrows();
    if b.ncols() != 3 || b_p.nrows() != m || b_p.ncols() != sigma_p.nrows() || !sigma_p.is_square() {
        return Err(Error::InvalidInput(format!(
            "incompatible shapes: B {:?}, B_p {:?}, Σ_p {:?}",
            b.shape(),
            b_p.shape(),
            sigma_p.shape()
        )));
    }
    check_psd(sigma_p, 1e-10, "pose covariance")?;
    let obs_cov = symmetrize(&(b_p * sigma_p * b_p.transpose()));
    let chol = Cholesky::new(obs_cov)
        .ok_or_else(|| Error::Covariance("B_p Σ_p B_pᵀ is singular; weight matrix undefined".into()))?;
    // Bᵀ W B = (L⁻¹B)ᵀ(L⁻¹B)
    let whitened = chol.l().solve_lower_triangular(b).ok_or_else(|| Error::Covariance("singular Cholesky factor".into()))?;
    let normal = dmatrix_to_mat3(&symmetrize(&(whitened.transpose() * &whitened)));
    let p = normal
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("Bᵀ W B is singular".into()))?;
    Ok((p + p.transpose()) * 0.5)
}

/// Inputs matched to a ray bundle: image coordinates are ray-plane
/// coordinates scaled by `pixels_per_meter`, so `B = s Π` and `B_p = s J`
/// with a zero `κ` column per image.
pub fn mig_inputs(bundle: &RayBundle, states: &[SatelliteState], sigma_p: DMatrix<f64>, pixels_per_meter: f64) -> Result<MigInputs> {
    if states.len() != bundle.len() {
        return Err(Error::InvalidInput(format!(
            "{} satellite states for {} rays",
            states.len(),
            bundle.len()
        )));
    }
    if !(pixels_per_meter > 0.0) {
        return Err(Error::InvalidInput("pixel scale must be positive".into()));
    }
    Ok(MigInputs {
        b: bundle.plane_operator() * pixels_per_meter,
        b_p: ray_displacement_jacobian_with_kappa(states) * pixels_per_meter,
        sigma_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pose_covariance() {
        // Orthonormal B columns, B_p the identity padded with zero columns.
        let mut b = DMatrix::zeros(4, 3);
        b[(0, 0)] = 1.0;
        b[(1, 1)] = 1.0;
        b[(2, 2)] = 1.0;
        let mut b_p = DMatrix::zeros(4, 12);
        for i in 0..4 {
            b_p[(i, i)] = 1.0;
        }
        let p = mig_covariance(&b, &b_p, &DMatrix::identity(12, 12)).unwrap();
        assert!((p - Mat3::identity()).norm() < 1e-14);
    }

    #[test]
    fn singular_weight_construction() {
        let b = DMatrix::from_element(4, 3, 1.0);
        let b_p = DMatrix::zeros(4, 12);
        assert!(matches!(
            mig_covariance(&b, &b_p, &DMatrix::identity(12, 12)),
            Err(Error::Covariance(_))
        ));
    }

    #[test]
    fn shape_mismatch() {
        let b = DMatrix::zeros(4, 2);
        assert!(mig_covariance(&b, &DMatrix::zeros(4, 12), &DMatrix::identity(12, 12)).is_err());
    }
}
