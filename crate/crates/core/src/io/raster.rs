//! Grid rasters: `f32` little-endian payload plus JSON sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_bytes, read_json, write_bytes, write_json, Provenance};
use crate::error::{Error, Result};
use crate::local::{GridSpec, LayerKind, Raster};

/// Payload value marking a missing cell.
pub const NODATA: f64 = -9999.0;

/// JSON sidecar describing a raster payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterSidecar {
    /// Lower-left corner of the grid (m).
    pub origin_xy: [f64; 2],
    pub spacing: f64,
    pub width: usize,
    pub height: usize,
    pub nodata: f64,
    pub layer: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl RasterSidecar {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            origin: self.origin_xy,
            spacing: self.spacing,
            width: self.width,
            height: self.height,
        }
    }
}

/// Sidecar path for a payload path (`z.f32` → `z.json`).
pub fn sidecar_path(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}

/// Writes `raster` to `payload` and its sidecar. Missing cells become
/// [`NODATA`].
pub fn write_raster(payload: &Path, raster: &Raster, layer: LayerKind, provenance: Option<&Provenance>) -> Result<()> {
    let spec = raster.spec;
    let mut bytes = Vec::with_capacity(4 * raster.data.len());
    for &v in &raster.data {
        let out = if v.is_finite() { v as f32 } else { NODATA as f32 };
        bytes.extend_from_slice(&out.to_le_bytes());
    }
    write_bytes(payload, &bytes)?;
    let sidecar = RasterSidecar {
        origin_xy: spec.origin,
        spacing: spec.spacing,
        width: spec.width,
        height: spec.height,
        nodata: NODATA,
        layer,
        provenance: provenance.cloned(),
    };
    write_json(&sidecar_path(payload), &sidecar)
}

/// Reads a raster and its sidecar. [`NODATA`] cells become `NaN`.
pub fn read_raster(payload: &Path) -> Result<(Raster, RasterSidecar)> {
    let sidecar: RasterSidecar = read_json(&sidecar_path(payload), "raster sidecar")?;
    let spec = sidecar.spec();
    spec.validate()
        .map_err(|e| Error::format("raster sidecar", sidecar_path(payload), e))?;
    let bytes = read_bytes(payload)?;
    if bytes.len() != 4 * spec.len() {
        return Err(Error::format(
            "raster payload",
            payload,
            format!("expected {} bytes, found {}", 4 * spec.len(), bytes.len()),
        ));
    }
    let nodata = sidecar.nodata as f32;
    let data = bytes
        .chunks_exact(4)
        .map(|c| {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if v == nodata || !v.is_finite() {
                f64::NAN
            } else {
                f64::from(v)
            }
        })
        .collect();
    Ok((Raster::new(spec, data)?, sidecar))
}

/// Writes an ESRI ASCII grid; the first row written is the northernmost.
pub fn write_ascii_grid(path: &Path, raster: &Raster) -> Result<()> {
    let spec = raster.spec;
    let mut text = String::new();
    let _ = writeln!(text, "ncols {}", spec.width);
    let _ = writeln!(text, "nrows {}", spec.height);
    let _ = writeln!(text, "xllcorner {}", spec.origin[0]);
    let _ = writeln!(text, "yllcorner {}", spec.origin[1]);
    let _ = writeln!(text, "cellsize {}", spec.spacing);
    let _ = writeln!(text, "NODATA_value {}", NODATA);
    for row in (0..spec.height).rev() {
        let line: Vec<String> = (0..spec.width)
            .map(|col| {
                let v = raster.data[spec.index(col, row)];
                if v.is_finite() {
                    format!("{}", v as f32)
                } else {
                    format!("{NODATA}")
                }
            })
            .collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}
