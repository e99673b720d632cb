//! Multi-ray intersection: the unweighted least-squares point, the
//! covariance-weighted point with its closed-form covariance `Ã⁻¹`, the
//! classical geopositioning propagation, Monte Carlo validation and
//! confidence ellipsoids.
//!
//! The weighted solver works on per-ray 2×3 projections `πᵢ = [ûᵢᵀ; v̂ᵢᵀ]`
//! stacked into a `2n × 3` operator `Π`. With `dᵢ = πᵢ pᵢ` and `W = S_ε⁻¹`,
//!
//! ```text
//! Ã = Πᵀ W Π,    X = Ã⁻¹ Πᵀ W d,    P = Ã⁻¹
//! ```

mod ellipsoid;
mod mig;
mod montecarlo;

pub use ellipsoid::{chi_square_cdf, chi_square_quantile, error_ellipsoid, ErrorEllipsoid};
pub use mig::{mig_covariance, mig_inputs, MigInputs};
pub use montecarlo::{monte_carlo_scatter, MonteCarloOptions, MonteCarloResult, MonteCarloScene, RNG_ALGORITHM};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dmatrix_to_mat3, floored_inverse, symmetrize, Mat3, Vec3};
use crate::pose::RayCovariance;
use crate::rpc::Ray;

/// Condition number of the normal matrix above which the geometry is rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Numerical invertibility limit for the weighted normal matrix.
pub const WEIGHTED_MAX_CONDITION: f64 = 1e15;
/// Condition number above which a warning is attached to results.
pub const WARN_CONDITION: f64 = 1e4;
/// Minimum largest pairwise angle between rays in a bundle (rad).
pub const MIN_BUNDLE_ANGLE: f64 = 1e-6;

const REFINE_MAX_ITER: usize = 20;
const REFINE_TOL: f64 = 1e-6;

/// Rays sharing one local frame, with an optional joint displacement covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct RayBundle {
    rays: Vec<Ray>,
    covariance: Option<RayCovariance>,
}

impl RayBundle {
    pub fn new(rays: Vec<Ray>, covariance: Option<RayCovariance>) -> Result<Self> {
        let n = rays.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("a ray bundle needs at least 2 rays, got {n}")));
        }
        if let Some(c) = &covariance {
            if c.0.shape() != (2 * n, 2 * n) {
                return Err(Error::InvalidInput(format!(
                    "ray covariance is {:?}, expected {}×{}",
                    c.0.shape(),
                    2 * n,
                    2 * n
                )));
            }
        }
        let max_angle = rays
            .iter()
            .enumerate()
            .flat_map(|(i, a)| rays[i + 1..].iter().map(move |b| a.angle_to(b)))
            .fold(0.0, f64::max);
        if !(max_angle > MIN_BUNDLE_ANGLE) {
            return Err(Error::DegenerateGeometry(format!(
                "all rays are parallel (largest pairwise angle {max_angle:e} rad)"
            )));
        }
        Ok(RayBundle { rays, covariance })
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn covariance(&self) -> Option<&RayCovariance> {
        self.covariance.as_ref()
    }

    /// Covariance, or the identity when none was attached.
    pub fn covariance_or_identity(&self) -> DMatrix<f64> {
        self.covariance
            .as_ref()
            .map(|c| c.0.clone())
            .unwrap_or_else(|| DMatrix::identity(2 * self.len(), 2 * self.len()))
    }

    pub fn with_covariance(&self, covariance: Option<RayCovariance>) -> Result<Self> {
        RayBundle::new(self.rays.clone(), covariance)
    }

    /// Same bundle with every ray origin moved by `(ε_u, ε_v)` pairs.
    pub fn displaced(&self, eps: &DVector<f64>) -> Self {
        let rays = self
            .rays
            .iter()
            .enumerate()
            .map(|(i, r)| r.displaced(eps[2 * i], eps[2 * i + 1]))
            .collect();
        RayBundle {
            rays,
            covariance: self.covariance.clone(),
        }
    }

    /// The stacked `2n × 3` projection operator `Π`.
    pub fn plane_operator(&self) -> DMatrix<f64> {
        let mut pi = DMatrix::zeros(2 * self.len(), 3);
        for (i, r) in self.rays.iter().enumerate() {
            for k in 0..3 {
                pi[(2 * i, k)] = r.u_axis[k];
                pi[(2 * i + 1, k)] = r.v_axis[k];
            }
        }
        pi
    }

    /// Plane coordinates `πᵢ pᵢ` of the ray origins, stacked.
    pub fn plane_origins(&self) -> DVector<f64> {
        plane_coordinates(&self.rays, |r| r.origin)
    }

    /// Plane coordinates `πᵢ X` of one point against every ray, stacked.
    pub fn plane_point(&self, x: &Vec3) -> DVector<f64> {
        plane_coordinates(&self.rays, |_| *x)
    }

    /// Unweighted normal matrix `A = Σ (I − r̂ r̂ᵀ)`.
    pub fn normal_matrix(&self) -> Mat3 {
        self.rays
            .iter()
            .map(|r| Mat3::identity() - r.direction * r.direction.transpose())
            .sum()
    }
}

fn plane_coordinates(rays: &[Ray], point: impl Fn(&Ray) -> Vec3) -> DVector<f64> {
    let mut d = DVector::zeros(2 * rays.len());
    for (i, r) in rays.iter().enumerate() {
        let p = point(r);
        d[2 * i] = r.u_axis.dot(&p);
        d[2 * i + 1] = r.v_axis.dot(&p);
    }
    d
}

/// Intersection point with covariance and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionResult {
    pub point: Vec3,
    /// `P = Ã⁻¹` (m²).
    pub covariance: Mat3,
    /// Weighted objective `D̃(X)` at the solution.
    pub weighted_residual: f64,
    /// Perpendicular distance from the point to each ray (m).
    pub distances: Vec<f64>,
    pub condition_number: f64,
    pub warnings: Vec<String>,
}

fn condition_number(m: &Mat3) -> f64 {
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let hi = eig.max();
    let lo = eig.min();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn invert_normal(m: &Mat3, what: &str) -> Result<(Mat3, f64)> {
    invert_normal_bounded(m, what, MAX_CONDITION)
}

fn invert_normal_bounded(m: &Mat3, what: &str, max_condition: f64) -> Result<(Mat3, f64)> {
    let cond = condition_number(m);
    if !(cond < max_condition) {
        return Err(Error::DegenerateGeometry(format!(
            "{what} normal matrix is ill-conditioned (condition number {cond:e})"
        )));
    }
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry(format!("{what} normal matrix is singular")))?;
    Ok(((inv + inv.transpose()) * 0.5, cond))
}

fn condition_warnings(cond: f64) -> Vec<String> {
    if cond > WARN_CONDITION {
        log::warn!("ray bundle is poorly conditioned (condition number {cond:.3e})");
        vec![format!("poorly conditioned ray geometry: condition number {cond:.3e}")]
    } else {
        Vec::new()
    }
}

/// A solver whose geometry and weights are fixed, so that repeated solves
/// with perturbed ray origins are a single `3 × 2n` product.
#[derive(Debug, Clone)]
pub struct PreparedIntersector {
    /// Maps stacked plane coordinates `d` to `X`.
    gain: DMatrix<f64>,
    /// Covariance of the estimator under its own weighting assumption.
    pub covariance: Mat3,
    pub condition_number: f64,
}

impl PreparedIntersector {
    /// Unweighted solver: `X = A⁻¹ Σ Pᵢ pᵢ = A⁻¹ Πᵀ d`.
    pub fn unweighted(bundle: &RayBundle) -> Result<Self> {
        let (a_inv, cond) = invert_normal(&bundle.normal_matrix(), "unweighted")?;
        let pi = bundle.plane_operator();
        let a_inv_d = crate::linalg::mat3_to_dmatrix(&a_inv);
        Ok(PreparedIntersector {
            gain: a_inv_d * pi.transpose(),
            covariance: a_inv,
            condition_number: cond,
        })
    }

    /// Covariance-weighted solver: `X = Ã⁻¹ Πᵀ W d`.
    pub fn weighted(bundle: &RayBundle) -> Result<Self> {
        let w = match bundle.covariance() {
            Some(c) => floored_inverse(&c.0)?,
            None => DMatrix::identity(2 * bundle.len(), 2 * bundle.len()),
        };
        // Geometry is judged on the unweighted normal matrix; strongly
        // unequal weights legitimately spread the spectrum of Ã further.
        let (_, cond) = invert_normal(&bundle.normal_matrix(), "unweighted")?;
        let pi = bundle.plane_operator();
        let pit_w = pi.transpose() * &w;
        let a_tilde = dmatrix_to_mat3(&symmetrize(&(&pit_w * &pi)));
        let (p, _) = invert_normal_bounded(&a_tilde, "weighted", WEIGHTED_MAX_CONDITION)?;
        Ok(PreparedIntersector {
            gain: crate::linalg::mat3_to_dmatrix(&p) * pit_w,
            covariance: p,
            condition_number: cond,
        })
    }

    /// Solves for stacked plane coordinates `d`.
    pub fn solve_plane(&self, d: &DVector<f64>) -> Vec3 {
        let x = &self.gain * d;
        Vec3::new(x[0], x[1], x[2])
    }

    pub fn solve(&self, rays: &[Ray]) -> Vec3 {
        self.solve_plane(&plane_coordinates(rays, |r| r.origin))
    }
}

/// Least-squares point minimizing the sum of squared perpendicular distances.
pub fn intersect_unweighted(bundle: &RayBundle) -> Result<Vec3> {
    Ok(PreparedIntersector::unweighted(bundle)?.solve(bundle.rays()))
}

/// Covariance-weighted intersection with `P = Ã⁻¹`. Without an attached
/// covariance the weights are the identity.
pub fn intersect_weighted(bundle: &RayBundle) -> Result<IntersectionResult> {
    let solver = PreparedIntersector::weighted(bundle)?;
    let point = solver.solve(bundle.rays());
    Ok(IntersectionResult {
        weighted_residual: weighted_objective(bundle, &point)?,
        distances: bundle.rays().iter().map(|r| r.distance_to(&point)).collect(),
        covariance: solver.covariance,
        condition_number: solver.condition_number,
        warnings: condition_warnings(solver.condition_number),
        point,
    })
}

/// Unweighted intersection packaged as a result. Its covariance is the
/// analytic covariance of the unweighted estimator under the bundle's `S_ε`.
pub fn intersect_unweighted_result(bundle: &RayBundle) -> Result<IntersectionResult> {
    let solver = PreparedIntersector::unweighted(bundle)?;
    let point = solver.solve(bundle.rays());
    Ok(IntersectionResult {
        weighted_residual: weighted_objective(bundle, &point)?,
        distances: bundle.rays().iter().map(|r| r.distance_to(&point)).collect(),
        covariance: unweighted_estimator_covariance(bundle)?,
        condition_number: solver.condition_number,
        warnings: condition_warnings(solver.condition_number),
        point,
    })
}

/// `D̃(X) = rᵀ S_ε⁻¹ r` with `r = Π⊨(𝒫 − 𝕏)`.
pub fn weighted_objective(bundle: &RayBundle, x: &Vec3) -> Result<f64> {
    let r = bundle.plane_origins() - bundle.plane_point(x);
    let w = match bundle.covariance() {
        Some(c) => floored_inverse(&c.0)?,
        None => DMatrix::identity(r.len(), r.len()),
    };
    Ok((r.transpose() * w * &r)[(0, 0)])
}

/// Covariance of the unweighted estimator when ray origins are displaced
/// with covariance `S_ε`: `A⁻¹ Πᵀ S_ε Π A⁻¹`.
///
/// Each displacement `Eᵢ εᵢ` (with `Eᵢ = [ûᵢ v̂ᵢ]`) is already orthogonal to its
/// ray, so `Pᵢ Eᵢ = Eᵢ` and the sandwich collapses onto `Π`.
pub fn unweighted_estimator_covariance(bundle: &RayBundle) -> Result<Mat3> {
    let (a_inv, _) = invert_normal(&bundle.normal_matrix(), "unweighted")?;
    let pi = bundle.plane_operator();
    let s = bundle.covariance_or_identity();
    let middle = dmatrix_to_mat3(&(pi.transpose() * s * &pi));
    let c = a_inv * middle * a_inv;
    Ok((c + c.transpose()) * 0.5)
}

/// Outcome of iterative refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub point: Vec3,
    pub iterations: usize,
}

/// Iterates `∂X = P Bᵀ W (x̃ − x)` from `x0`, where the "image" coordinates of a
/// point are its stacked plane coordinates `Π⊨𝕏` and `x̃` defaults to the ray
/// origins' plane coordinates. Stops when `|∂X| < 1e-6 m` (at most 20 steps).
pub fn refine_intersection(x0: &Vec3, bundle: &RayBundle, observations: Option<&DVector<f64>>) -> Result<Refinement> {
    let observed = match observations {
        Some(o) if o.len() == 2 * bundle.len() => o.clone(),
        Some(o) => {
            return Err(Error::InvalidInput(format!(
                "expected {} observations, got {}",
                2 * bundle.len(),
                o.len()
            )))
        }
        None => bundle.plane_origins(),
    };
    let solver = PreparedIntersector::weighted(bundle)?;
    let mut x = *x0;
    let mut last_step = f64::INFINITY;
    for it in 0..REFINE_MAX_ITER {
        let residual = &observed - bundle.plane_point(&x);
        let dx = solver.solve_plane(&residual);
        x += dx;
        last_step = dx.norm();
        if last_step < REFINE_TOL {
            return Ok(Refinement {
                point: x,
                iterations: it + 1,
            });
        }
    }
    Err(Error::RefinementNotConverged {
        iterations: REFINE_MAX_ITER,
        last_step,
        last: x.into(),
    })
}
