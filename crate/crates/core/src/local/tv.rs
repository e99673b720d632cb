//! Total variation of disparity and its mapping to disparity uncertainty.
//!
//! Each pixel gets `g = √(|d(i+1,j) − d(i,j)| + |d(i,j+1) − d(i,j)|)` from
//! forward differences (clamped at the border). The class of a pixel is the
//! largest `n ≤ n_max` for which the running sum of ring means
//! `Σ_{m=1..n} mean_{N_m} g` stays below `θ`, where `N_m` is the square ring
//! of Chebyshev radius `m` around the pixel with coordinates clamped to the
//! image.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disparity image; `NaN` marks invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl DisparityGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "disparity grid {width}×{height} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidInput("disparity values must be finite or NaN".into()));
        }
        Ok(DisparityGrid { width, height, values })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    /// Per-pixel variation `g`; `NaN` where any input is invalid.
    pub fn variation(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        (0..w * h)
            .map(|k| {
                let (i, j) = (k % w, k / w);
                let d = self.at(i, j);
                let dx = self.at((i + 1).min(w - 1), j) - d;
                let dy = self.at(i, (j + 1).min(h - 1)) - d;
                (dx.abs() + dy.abs()).sqrt()
            })
            .collect()
    }
}

/// Per-pixel classes; `None` for invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct TvClasses {
    pub width: usize,
    pub height: usize,
    pub classes: Vec<Option<u32>>,
}

/// Mean of `g` over the clamped Chebyshev ring of radius `m`, ignoring
/// invalid pixels. `None` when the whole ring is invalid.
fn ring_mean(g: &[f64], w: usize, h: usize, ci: usize, cj: usize, m: usize) -> Option<f64> {
    let m = m as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let (ci, cj) = (ci as i64, cj as i64);
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut visit = |di: i64, dj: i64| {
        let v = g[clamp(cj + dj, h) * w + clamp(ci + di, w)];
        if !v.is_nan() {
            sum += v;
            count += 1;
        }
    };
    for d in -m..=m {
        visit(d, -m);
        visit(d, m);
    }
    for d in -m + 1..m {
        visit(-m, d);
        visit(m, d);
    }
    (count > 0).then(|| sum / count as f64)
}

/// Total-variation class of every pixel.
pub fn tv_class(d: &DisparityGrid, theta: f64, n_max: u32) -> Result<TvClasses> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!("TV threshold must be positive, got {theta}")));
    }
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let (w, h) = (d.width, d.height);
    let g = d.variation();
    let classes = (0..w * h)
        .into_par_iter()
        .map(|k| {
            if d.values[k].is_nan() {
                return None;
            }
            let (i, j) = (k % w, k / w);
            let mut total = 0.0;
            let mut class = 0;
            for m in 1..=n_max {
                // A fully invalid ring carries no evidence of variation.
                total += ring_mean(&g, w, h, i, j, m as usize).unwrap_or(0.0);
                if total < theta {
                    class = m;
                } else {
                    break;
                }
            }
            Some(class)
        })
        .collect();
    Ok(TvClasses { width: w, height: h, classes })
}

/// Monotone table from TV class to disparity standard deviation (pixels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvCalibration {
    /// `(class, σ_disp)` knots, classes strictly increasing.
    pub knots: Vec<(f64, f64)>,
}

impl TvCalibration {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let c = TvCalibration { knots };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::InvalidInput("TV calibration table is empty".into()));
        }
        if self.knots.iter().any(|(c, s)| !c.is_finite() || !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidInput("TV calibration entries must be finite with σ ≥ 0".into()));
        }
        for w in self.knots.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[1].1 < w[0].1) {
                return Err(Error::InvalidInput(
                    "TV calibration needs strictly increasing classes and strictly decreasing σ".into(),
                ));
            }
        }
        Ok(())
    }

    /// Piecewise-linear lookup, clamped at both ends.
    pub fn sigma(&self, class: f64) -> f64 {
        let k = &self.knots;
        if class <= k[0].0 {
            return k[0].1;
        }
        if class >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let hi = k.partition_point(|(c, _)| *c <= class);
        let (c0, s0) = k[hi - 1];
        let (c1, s1) = k[hi];
        if class == c0 {
            return s0;
        }
        s0 + (s1 - s0) * (class - c0) / (c1 - c0)
    }
}

/// Disparity standard deviation per pixel; `NaN` for invalid pixels.
pub fn tv_to_sigma(classes: &TvClasses, cal: &TvCalibration) -> Result<Vec<f64>> {
    cal.validate()?;
    Ok(classes
        .classes
        .iter()
        .map(|c| c.map_or(f64::NAN, |c| cal.sigma(c as f64)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_disparity_is_max_class() {
        let d = DisparityGrid::new(6, 5, vec![3.0; 30]).unwrap();
        let c = tv_class(&d, 0.1, 4).unwrap();
        assert!(c.classes.iter().all(|&k| k == Some(4)));
    }

    #[test]
    fn hand_evaluated_patch() {
        // 5×5 zeros with a single 4 at (2, 1). g at (2, 1) is √8 (both forward
        // differences are −4); g at (1, 1) and (2, 0) is 2. Around the center
        // (2, 2) the first ring holds (1,1), (2,1), and the rest zero:
        // mean = (2 + √8)/8 ≈ 0.6036.
        let mut v = vec![0.0; 25];
        v[5 + 2] = 4.0;
        let d = DisparityGrid::new(5, 5, v).unwrap();
        let g = d.variation();
        assert!((g[5 + 2] - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(g[5 + 1], 2.0);
        assert_eq!(g[2], 2.0);
        let ring = ring_mean(&g, 5, 5, 2, 2, 1).unwrap();
        assert!((ring - (2.0 + 8f64.sqrt()) / 8.0).abs() < 1e-15);
        let c = tv_class(&d, 0.6, 3).unwrap();
        assert_eq!(c.classes[12], Some(0));
        let c = tv_class(&d, 0.61, 3).unwrap();
        assert_eq!(c.classes[12], Some(1));
    }

    #[test]
    fn clamped_ring_repeats_border() {
        let g: Vec<f64> = (0..9).map(|k| k as f64).collect();
        // Ring of radius 1 around (0, 0) in a 3×3 image, clamped.
        let m = ring_mean(&g, 3, 3, 0, 0, 1).unwrap();
        let expect = (0.0 + 0.0 + 1.0 + 3.0 + 4.0 + 0.0 + 1.0 + 3.0) / 8.0;
        assert!((m - expect).abs() < 1e-15);
    }

    #[test]
    fn invalid_pixels_are_excluded() {
        let mut v = vec![1.0; 25];
        v[0] = f64::NAN;
        let d = DisparityGrid::new(5, 5, v).unwrap();
        let c = tv_class(&d, 0.5, 2).unwrap();
        assert_eq!(c.classes[0], None);
        assert_eq!(c.classes[12], Some(2));
    }

    #[test]
    fn calibration_lookup() {
        let cal = TvCalibration::new(vec![(0.0, 2.0), (2.0, 1.0), (4.0, 0.5)]).unwrap();
        assert_eq!(cal.sigma(2.0), 1.0);
        assert_eq!(cal.sigma(1.0), 1.5);
        assert_eq!(cal.sigma(3.0), 0.75);
        assert_eq!(cal.sigma(9.0), 0.5);
        assert_eq!(cal.sigma(-1.0), 2.0);
        assert!(TvCalibration::new(vec![(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(TvCalibration::new(vec![]).is_err());
    }

    #[test]
    fn bad_parameters() {
        let d = DisparityGrid::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(tv_class(&d, 0.0, 2).is_err());
        assert!(tv_class(&d, 1.0, 0).is_err());
        assert!(DisparityGrid::new(2, 2, vec![0.0; 3]).is_err());
    }
}
