//! Monte Carlo propagation of pose errors to the intersection point.
//!
//! Each sample draws `φ ~ N(0, S_φ)` through a symmetric factor `L`
//! (`L Lᵀ = S_φ`), displaces every ray origin by `J φ` within its ray plane,
//! and re-intersects. Sample `i` uses its own generator
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so results do not depend
//! on how samples are spread across threads.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{PreparedIntersector, RayBundle};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_factor, Mat3, Vec3};
use crate::pose::{ray_covariance, PoseCovariance};
use crate::rpc::Ray;

/// Identifier of the sampling scheme, recorded in every output.
pub const RNG_ALGORITHM: &str = "chacha8-seed_from_u64-stream_per_sample/standard-normal-ziggurat";

/// Nominal rays with the pose model that perturbs them.
#[derive(Debug, Clone)]
pub struct MonteCarloScene {
    /// Nominal rays with `S_ε = J S_φ Jᵀ` attached.
    pub bundle: RayBundle,
    /// `2n × 5n` displacement Jacobian.
    pub jacobian: DMatrix<f64>,
    pub pose: PoseCovariance,
}

impl MonteCarloScene {
    pub fn new(rays: Vec<Ray>, jacobian: DMatrix<f64>, pose: PoseCovariance) -> Result<Self> {
        if jacobian.nrows() != 2 * rays.len() {
            return Err(Error::InvalidInput(format!(
                "Jacobian has {} rows for {} rays",
                jacobian.nrows(),
                rays.len()
            )));
        }
        let cov = ray_covariance(&jacobian, &pose)?;
        Ok(MonteCarloScene {
            bundle: RayBundle::new(rays, Some(cov))?,
            jacobian,
            pose,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MonteCarloOptions {
    /// Intersect samples with the weighted solver instead of the unweighted one.
    pub weighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub points: Vec<Vec3>,
    pub mean: Vec3,
    /// Unbiased sample covariance (`n − 1` denominator).
    pub sample_covariance: Mat3,
    pub seed: u64,
    pub n_samples: usize,
    pub weighted: bool,
    pub rng: &'static str,
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `n_samples` perturbed bundles and intersects each one.
pub fn monte_carlo_scatter(scene: &MonteCarloScene, n_samples: usize, seed: u64, options: MonteCarloOptions) -> Result<MonteCarloResult> {
    if n_samples < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {n_samples}")));
    }
    let solver = if options.weighted {
        PreparedIntersector::weighted(&scene.bundle)?
    } else {
        PreparedIntersector::unweighted(&scene.bundle)?
    };
    let factor = symmetric_factor(&scene.pose.matrix)?;
    let g = &scene.jacobian * factor;
    let dim = g.ncols();
    let rays = scene.bundle.rays();
    let nominal = scene.bundle.plane_origins();

    let points: Vec<Vec3> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let eps = &g * z;
            // Displaced origins p + ε_u û + ε_v v̂, re-expressed in plane coordinates.
            let mut d = DVector::zeros(nominal.len());
            for (k, r) in rays.iter().enumerate() {
                let p = r.displaced(eps[2 * k], eps[2 * k + 1]).origin;
                d[2 * k] = r.u_axis.dot(&p);
                d[2 * k + 1] = r.v_axis.dot(&p);
            }
            solver.solve_plane(&d)
        })
        .collect();

    // Shifted accumulation about the first sample keeps identical samples at
    // exactly zero covariance and limits cancellation.
    let n = points.len() as f64;
    let shift = points[0];
    let (sum, sum_sq) = points.iter().fold((Vec3::zeros(), Mat3::zeros()), |(s, q), p| {
        let d = p - shift;
        (s + d, q + d * d.transpose())
    });
    let mean_shift = sum / n;
    let cov = (sum_sq - mean_shift * sum.transpose()) / (n - 1.0);
    Ok(MonteCarloResult {
        points,
        mean: shift + mean_shift,
        sample_covariance: (cov + cov.transpose()) * 0.5,
        seed,
        n_samples,
        weighted: options.weighted,
        rng: RNG_ALGORITHM,
    })
}
