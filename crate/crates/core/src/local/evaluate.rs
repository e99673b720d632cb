//! Comparison of a fused DSM against a co-registered ground-truth grid.
//!
//! The normalized distance of a cell is `𝒟 = |z − z_gt| / σ_z`. A Gaussian
//! error stays within `𝒟 ≤ 1.644` with 90% probability. The neighborhood
//! variant compares against the closest ground-truth elevation within the
//! horizontal radius `r_h90 = 2.146·σ̄_h + S_gt/√2`.

use serde::Serialize;

use super::fusion::DsmGrid;
use super::grid::Raster;
use crate::error::{Error, Result};

/// Two-sided 90% bound of a standard normal variable.
pub const NDIST_90: f64 = 1.644;
/// Circular 90% error factor for a planar Gaussian with per-axis `σ̄_h`.
pub const CE90_FACTOR: f64 = 2.146;
/// Elevation agreement treated as exact when `σ_z = 0` (m).
pub const EPS_Z: f64 = 1e-3;

/// `|z − gt| / σ`, with `σ = 0` giving 0 within `EPS_Z` and `+∞` beyond.
pub fn normalized_value(z: f64, gt: f64, sigma: f64) -> f64 {
    let err = (z - gt).abs();
    if sigma > 0.0 {
        err / sigma
    } else if err <= EPS_Z {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `r_h90 = 2.146·σ̄_h + S_gt/√2`.
pub fn h90_radius(sigma_h: f64, gt_spacing: f64) -> f64 {
    CE90_FACTOR * sigma_h + gt_spacing / std::f64::consts::SQRT_2
}

/// Per-cell `r_h90` from the DSM's horizontal standard deviations.
pub fn h90_grid(dsm: &DsmGrid, gt_spacing: f64) -> Result<Raster> {
    if !(gt_spacing > 0.0) {
        return Err(Error::InvalidInput(format!("ground-truth spacing must be positive, got {gt_spacing}")));
    }
    Raster::new(dsm.spec, dsm.sigma_h.iter().map(|&s| h90_radius(s, gt_spacing)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NdistSummary {
    /// Cells with a DSM value, a σ_z and a ground-truth comparison.
    pub valid_cells: usize,
    pub fraction_within_1: f64,
    pub fraction_within_1644: f64,
    /// Cells where `σ_z = 0` and the error exceeded `EPS_Z`.
    pub infinite_cells: usize,
}

impl NdistSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let valid: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        let n = valid.len();
        let frac = |t: f64| {
            if n == 0 {
                0.0
            } else {
                valid.iter().filter(|&&v| v <= t).count() as f64 / n as f64
            }
        };
        NdistSummary {
            valid_cells: n,
            fraction_within_1: frac(1.0),
            fraction_within_1644: frac(NDIST_90),
            infinite_cells: valid.iter().filter(|v| v.is_infinite()).count(),
        }
    }
}

fn check_coregistered(dsm: &DsmGrid, gt: &Raster) -> Result<()> {
    if !dsm.spec.same_cells(&gt.spec) {
        return Err(Error::InvalidInput(format!(
            "DSM grid {:?} and ground-truth grid {:?} are not co-registered",
            dsm.spec, gt.spec
        )));
    }
    Ok(())
}

/// `𝒟` per cell; missing where the DSM, its `σ_z` or the ground truth is missing.
pub fn normalized_distance(dsm: &DsmGrid, gt: &Raster) -> Result<Raster> {
    check_coregistered(dsm, gt)?;
    let data = (0..dsm.spec.len())
        .map(|k| {
            let (z, s, g) = (dsm.z[k], dsm.sigma_z[k], gt.data[k]);
            if z.is_nan() || s.is_nan() || g.is_nan() {
                f64::NAN
            } else {
                normalized_value(z, g, s)
            }
        })
        .collect();
    Raster::new(dsm.spec, data)
}

/// `𝒟` against the ground-truth cell within `r_h90` (cell-center distance)
/// that minimizes `|z − z_gt|`. Missing when no ground truth lies in range.
pub fn neighborhood_normalized_distance(dsm: &DsmGrid, gt: &Raster, r_h90: &Raster) -> Result<Raster> {
    check_coregistered(dsm, gt)?;
    if !dsm.spec.same_cells(&r_h90.spec) {
        return Err(Error::InvalidInput("r_h90 grid is not co-registered with the DSM".into()));
    }
    let spec = dsm.spec;
    let s = spec.spacing;
    let data = (0..spec.len())
        .map(|k| {
            let (z, sigma, r) = (dsm.z[k], dsm.sigma_z[k], r_h90.data[k]);
            if z.is_nan() || sigma.is_nan() || r.is_nan() {
                return f64::NAN;
            }
            let (i, j) = spec.coords(k);
            let reach = (r / s).floor() as i64;
            let mut best = f64::INFINITY;
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= spec.width as i64 || nj >= spec.height as i64 {
                        continue;
                    }
                    let dist = s * ((di * di + dj * dj) as f64).sqrt();
                    if dist > r {
                        continue;
                    }
                    if let Some(g) = gt.get(ni as usize, nj as usize) {
                        best = best.min((z - g).abs());
                    }
                }
            }
            if best.is_infinite() {
                f64::NAN
            } else {
                normalized_value(z, z - best, sigma)
            }
        })
        .collect();
    Raster::new(spec, data)
}
