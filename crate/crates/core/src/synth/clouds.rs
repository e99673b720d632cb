//! Synthetic stereo point clouds sampled from a height field.
//!
//! Each pair samples a jittered lattice with its own random phase, adds
//! Gaussian position noise, and replaces a fraction of points with outliers.
//! Point probabilities stand in for forward/reverse matching consistency:
//! `P = exp(−d_fr² / (2 s²))` where `d_fr` is a simulated discrepancy that is
//! small for inliers and several `s` for outliers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scene::Surface;
use crate::error::{Error, Result};
use crate::local::{GridSpec, StereoCloud, WeightedPoint};

/// Lowest probability assigned to a point.
const MIN_PROBABILITY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudOptions {
    pub n_pairs: usize,
    /// Lattice step (m).
    pub point_spacing: f64,
    /// Uniform jitter as a fraction of the lattice step.
    pub jitter: f64,
    /// Horizontal position noise (m).
    pub sigma_xy: f64,
    /// Vertical noise (m).
    pub sigma_z: f64,
    /// Fraction of points replaced by outliers, in `[0, 1)`.
    pub outlier_rate: f64,
    /// Outlier elevations are offset from the surface by a uniform draw in
    /// `±[min, max]` (m).
    pub outlier_offset: [f64; 2],
    /// Forward/reverse discrepancy scale `s` (m).
    pub fr_scale: f64,
    /// Inlier forward/reverse discrepancy standard deviation (m).
    pub fr_sigma: f64,
    /// Sampling margin beyond the grid (m).
    pub margin: f64,
    pub seed: u64,
}

impl CloudOptions {
    /// Noise-free points on a lattice at a third of the cell size.
    pub fn noiseless(n_pairs: usize, spec: &GridSpec, seed: u64) -> Self {
        CloudOptions {
            n_pairs,
            point_spacing: spec.spacing / 3.0,
            jitter: 0.3,
            sigma_xy: 0.0,
            sigma_z: 0.0,
            outlier_rate: 0.0,
            outlier_offset: [5.0, 20.0],
            fr_scale: 0.5,
            fr_sigma: 0.0,
            margin: 2.0 * spec.spacing,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.jitter, self.sigma_xy, self.sigma_z, self.fr_sigma, self.margin];
        if self.n_pairs == 0
            || !(self.point_spacing > 0.0)
            || !(self.fr_scale > 0.0)
            || nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite()))
            || !(0.0..1.0).contains(&self.outlier_rate)
            || !(self.outlier_offset[0] >= 0.0 && self.outlier_offset[1] >= self.outlier_offset[0])
        {
            return Err(Error::InvalidInput(format!("invalid cloud options {self:?}")));
        }
        Ok(())
    }
}

/// Clouds for `n_pairs` stereo pairs covering `spec`, ids `pair_000`, ….
/// Pair `q` draws from its own stream of the seeded generator.
pub fn make_stereo_clouds(surface: &Surface, spec: &GridSpec, opts: &CloudOptions) -> Result<Vec<StereoCloud>> {
    opts.validate()?;
    spec.validate()?;
    let x0 = spec.origin[0] - opts.margin;
    let y0 = spec.origin[1] - opts.margin;
    let w = spec.width as f64 * spec.spacing + 2.0 * opts.margin;
    let h = spec.height as f64 * spec.spacing + 2.0 * opts.margin;
    let nx = (w / opts.point_spacing).ceil() as usize;
    let ny = (h / opts.point_spacing).ceil() as usize;
    let normal = |s: f64| Normal::new(0.0, s).map_err(|e| Error::InvalidInput(e.to_string()));
    let (nxy, nz, nfr) = (normal(opts.sigma_xy)?, normal(opts.sigma_z)?, normal(opts.fr_sigma)?);

    (0..opts.n_pairs)
        .map(|q| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(q as u64);
            let phase = [rng.random::<f64>() * opts.point_spacing, rng.random::<f64>() * opts.point_spacing];
            let mut points = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let jx = (rng.random::<f64>() - 0.5) * opts.jitter * opts.point_spacing;
                    let jy = (rng.random::<f64>() - 0.5) * opts.jitter * opts.point_spacing;
                    let tx = x0 + phase[0] + i as f64 * opts.point_spacing + jx;
                    let ty = y0 + phase[1] + j as f64 * opts.point_spacing + jy;
                    let tz = surface.height(tx, ty);
                    let outlier = rng.random::<f64>() < opts.outlier_rate;
                    let (x, y) = (tx + nxy.sample(&mut rng), ty + nxy.sample(&mut rng));
                    let (z, d_fr) = if outlier {
                        let [lo, hi] = opts.outlier_offset;
                        let mag = lo + (hi - lo) * rng.random::<f64>();
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        (tz + sign * mag, opts.fr_scale * (3.0 + 3.0 * rng.random::<f64>()))
                    } else {
                        let d = (nfr.sample(&mut rng) as f64).hypot(nfr.sample(&mut rng));
                        (tz + nz.sample(&mut rng), d)
                    };
                    let p = (-(d_fr * d_fr) / (2.0 * opts.fr_scale * opts.fr_scale)).exp().max(MIN_PROBABILITY);
                    points.push(WeightedPoint { x, y, z, p });
                }
            }
            StereoCloud::new(format!("pair_{q:03}"), points)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::{fuse_dsm, FusionParams};

    fn spec() -> GridSpec {
        GridSpec::new([0.0, 0.0], 0.5, 20, 16).unwrap()
    }

    #[test]
    fn deterministic_in_seed() {
        let mut o = CloudOptions::noiseless(3, &spec(), 9);
        o.sigma_z = 0.2;
        o.outlier_rate = 0.1;
        let a = make_stereo_clouds(&Surface::flat(7.0), &spec(), &o).unwrap();
        let b = make_stereo_clouds(&Surface::flat(7.0), &spec(), &o).unwrap();
        assert_eq!(a, b);
        o.seed = 10;
        let c = make_stereo_clouds(&Surface::flat(7.0), &spec(), &o).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_plane_is_recovered() {
        let clouds = make_stereo_clouds(&Surface::flat(7.0), &spec(), &CloudOptions::noiseless(5, &spec(), 1)).unwrap();
        assert!(clouds.iter().flat_map(|c| &c.points).all(|p| p.p == 1.0 && p.z == 7.0));
        let dsm = fuse_dsm(&clouds, &spec(), &FusionParams::for_spacing(0.5)).unwrap();
        for k in 0..spec().len() {
            assert!(dsm.is_valid(k));
            assert!((dsm.z[k] - 7.0).abs() < 1e-12);
            assert!(dsm.sigma_z[k] < 1e-12);
        }
    }

    #[test]
    fn outliers_have_low_probability() {
        let mut o = CloudOptions::noiseless(1, &spec(), 4);
        o.outlier_rate = 0.3;
        o.fr_sigma = 0.05;
        let c = &make_stereo_clouds(&Surface::flat(0.0), &spec(), &o).unwrap()[0];
        for p in &c.points {
            if p.z.abs() >= 5.0 {
                assert!(p.p < 0.02);
            } else {
                assert!(p.p > 0.9);
            }
        }
    }

    #[test]
    fn bad_rates_rejected() {
        let mut o = CloudOptions::noiseless(1, &spec(), 4);
        o.outlier_rate = 1.0;
        assert!(make_stereo_clouds(&Surface::flat(0.0), &spec(), &o).is_err());
    }
}
