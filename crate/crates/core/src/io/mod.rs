//! File formats shared by the command-line tool and the synthetic generators.
//!
//! - JSON documents (RPC models, scene configurations, reports) via serde.
//! - Grid rasters: row-major little-endian `f32` payload with a JSON sidecar,
//!   plus ESRI ASCII grid export.
//! - Point clouds: little-endian `f64 × 4` records with a JSON header, plus a
//!   CSV variant.

mod cloud;
mod raster;
mod report;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cloud::{read_cloud, read_cloud_csv, write_cloud, write_cloud_csv, CloudHeader, DEFAULT_CLOUD_FRAME};
pub use raster::{read_raster, sidecar_path, write_ascii_grid, write_raster, RasterSidecar, NODATA};
pub use report::{EllipsoidReport, IntersectionReport};

/// Identifies the tool build, configuration and seed behind an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Reads and deserializes a JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(what, path, e))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_json_string(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Pretty JSON text for `value`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(format!("cannot serialize: {e}")))
}

/// Writes `bytes`, creating parent directories as needed.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rpc::{RpcModel, RPC_TERMS};

    fn rpc() -> RpcModel {
        let mut num = [0.0; RPC_TERMS];
        num[1] = 1.0;
        num[7] = 1e-3;
        let mut den = [0.0; RPC_TERMS];
        den[0] = 1.0;
        RpcModel {
            line_off: 100.0,
            samp_off: 200.0,
            lat_off: -34.0,
            long_off: -58.0,
            height_off: 20.0,
            line_scale: 100.0,
            samp_scale: 200.0,
            lat_scale: 0.01,
            long_scale: 0.01,
            height_scale: 50.0,
            line_num_coeff: num,
            line_den_coeff: den,
            samp_num_coeff: num,
            samp_den_coeff: den,
        }
    }

    #[test]
    fn json_roundtrip_preserves_rpc() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/rpc.json");
        let m = rpc();
        write_json(&path, &m).unwrap();
        let back: RpcModel = read_json(&path, "rpc").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_json::<RpcModel>(Path::new("/nonexistent/rpc.json"), "rpc").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn malformed_json_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{\"line_off\": ").unwrap();
        let err = read_json::<RpcModel>(&path, "rpc").unwrap_err();
        assert!(matches!(err, Error::Format { what: "rpc", .. }));
        assert!(err.is_io());
    }
}
