//! Regular planimetric grids and single-layer rasters.
//!
//! The origin is the lower-left corner of cell `(0, 0)`. Cell `(i, j)` has its
//! center at `origin + ((i + ½)·s, (j + ½)·s)`, so row `j` grows with `y`.
//! Storage is row-major with row 0 first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    /// Cell size (m).
    pub spacing: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(origin: [f64; 2], spacing: f64, width: usize, height: usize) -> Result<Self> {
        let g = GridSpec {
            origin,
            spacing,
            width,
            height,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {}", self.spacing)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("grid must have at least one cell".into()));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.spacing,
            self.origin[1] + (j as f64 + 0.5) * self.spacing,
        ]
    }

    /// Cell containing `(x, y)`, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = ((x - self.origin[0]) / self.spacing).floor();
        let fj = ((y - self.origin[1]) / self.spacing).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.width as f64 || fj >= self.height as f64 {
            None
        } else {
            Some((fi as usize, fj as usize))
        }
    }

    /// Whether two grids describe the same cells.
    pub fn same_cells(&self, other: &GridSpec) -> bool {
        self == other
    }
}

/// One layer of per-cell values; `NaN` marks missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub spec: GridSpec,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(spec: GridSpec, data: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if data.len() != spec.len() {
            return Err(Error::InvalidInput(format!(
                "raster has {} values for a {}×{} grid",
                data.len(),
                spec.width,
                spec.height
            )));
        }
        Ok(Raster { spec, data })
    }

    pub fn filled(spec: GridSpec, value: f64) -> Self {
        Raster {
            data: vec![value; spec.len()],
            spec,
        }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..spec.len())
            .map(|k| {
                let (i, j) = spec.coords(k);
                f(i, j)
            })
            .collect();
        Raster { spec, data }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.data[self.spec.index(i, j)];
        (!v.is_nan()).then_some(v)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.spec.index(i, j);
        self.data[k] = v;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| !v.is_nan()).count()
    }
}

/// Named raster layers written by the tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Z,
    SigmaZ,
    SigmaH,
    Pbar,
    Ndist,
    Class,
    SigmaDisp,
    ZMedian,
    Count,
    Disparity,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Z => "z",
            LayerKind::SigmaZ => "sigma_z",
            LayerKind::SigmaH => "sigma_h",
            LayerKind::Pbar => "pbar",
            LayerKind::Ndist => "ndist",
            LayerKind::Class => "class",
            LayerKind::SigmaDisp => "sigma_disp",
            LayerKind::ZMedian => "z_median",
            LayerKind::Count => "count",
            LayerKind::Disparity => "disparity",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_and_lookup() {
        let g = GridSpec::new([10.0, 20.0], 0.5, 4, 3).unwrap();
        assert_eq!(g.cell_center(0, 0), [10.25, 20.25]);
        assert_eq!(g.cell_center(3, 2), [11.75, 21.25]);
        assert_eq!(g.cell_of(10.26, 21.4), Some((0, 2)));
        assert_eq!(g.cell_of(9.99, 20.1), None);
        assert_eq!(g.cell_of(12.0, 20.1), None);
        assert_eq!(g.coords(g.index(2, 1)), (2, 1));
    }

    #[test]
    fn invalid_specs() {
        assert!(GridSpec::new([0.0, 0.0], 0.0, 2, 2).is_err());
        assert!(GridSpec::new([0.0, 0.0], 1.0, 0, 2).is_err());
        let g = GridSpec::new([0.0, 0.0], 1.0, 2, 2).unwrap();
        assert!(Raster::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn raster_nan_is_missing() {
        let g = GridSpec::new([0.0, 0.0], 1.0, 2, 2).unwrap();
        let mut r = Raster::filled(g, f64::NAN);
        r.set(1, 0, 3.0);
        assert_eq!(r.get(1, 0), Some(3.0));
        assert_eq!(r.get(0, 1), None);
        assert_eq!(r.valid_count(), 1);
    }
}
