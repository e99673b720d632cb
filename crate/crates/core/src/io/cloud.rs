//! Stereo point clouds: `f64 × 4` little-endian records plus JSON header, or CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_bytes, read_json, write_bytes, write_json, Provenance};
use crate::error::{Error, Result};
use crate::local::{StereoCloud, WeightedPoint};

/// Frame label written when none is given.
pub const DEFAULT_CLOUD_FRAME: &str = "local_enu";

const RECORD_BYTES: usize = 32;

/// JSON header stored beside a binary cloud (`pair.bin` → `pair.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudHeader {
    pub pair_id: String,
    pub count: usize,
    pub frame: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Writes the binary records to `path` and the header beside it.
pub fn write_cloud(path: &Path, cloud: &StereoCloud, frame: &str, provenance: Option<&Provenance>) -> Result<()> {
    let mut bytes = Vec::with_capacity(RECORD_BYTES * cloud.points.len());
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.p] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_bytes(path, &bytes)?;
    let header = CloudHeader {
        pair_id: cloud.pair_id.clone(),
        count: cloud.points.len(),
        frame: frame.to_string(),
        provenance: provenance.cloned(),
    };
    write_json(&path.with_extension("json"), &header)
}

/// Reads a binary cloud and its header.
pub fn read_cloud(path: &Path) -> Result<(StereoCloud, CloudHeader)> {
    let header: CloudHeader = read_json(&path.with_extension("json"), "cloud header")?;
    let bytes = read_bytes(path)?;
    if bytes.len() != RECORD_BYTES * header.count {
        return Err(Error::format(
            "cloud records",
            path,
            format!("header count {} needs {} bytes, found {}", header.count, RECORD_BYTES * header.count, bytes.len()),
        ));
    }
    let points = bytes
        .chunks_exact(RECORD_BYTES)
        .map(|r| {
            let f = |k: usize| f64::from_le_bytes(r[8 * k..8 * k + 8].try_into().expect("8-byte field"));
            WeightedPoint {
                x: f(0),
                y: f(1),
                z: f(2),
                p: f(3),
            }
        })
        .collect();
    let cloud = StereoCloud::new(header.pair_id.clone(), points).map_err(|e| Error::format("cloud records", path, e))?;
    Ok((cloud, header))
}

/// Writes `x,y,z,p` rows under a header line.
pub fn write_cloud_csv(path: &Path, cloud: &StereoCloud) -> Result<()> {
    let mut text = String::from("x,y,z,p\n");
    for p in &cloud.points {
        text.push_str(&format!("{},{},{},{}\n", p.x, p.y, p.z, p.p));
    }
    write_bytes(path, text.as_bytes())
}

/// Reads a CSV cloud; the pair id is the file stem.
pub fn read_cloud_csv(path: &Path) -> Result<StereoCloud> {
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| Error::format("cloud csv", path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == "x,y,z,p" => {}
        _ => return Err(Error::format("cloud csv", path, "missing x,y,z,p header")),
    }
    let mut points = Vec::new();
    for (n, line) in lines {
        let values: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format("cloud csv", path, format!("line {}: {e}", n + 1)))?;
        if values.len() != 4 {
            return Err(Error::format("cloud csv", path, format!("line {}: expected 4 fields", n + 1)));
        }
        points.push(WeightedPoint {
            x: values[0],
            y: values[1],
            z: values[2],
            p: values[3],
        });
    }
    let pair_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    StereoCloud::new(pair_id, points).map_err(|e| Error::format("cloud csv", path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> StereoCloud {
        let points = (0..5)
            .map(|i| WeightedPoint {
                x: i as f64 * 0.1,
                y: -1.0 / (i + 1) as f64,
                z: 20.0 + 1e-9 * i as f64,
                p: 0.2 * (i + 1) as f64,
            })
            .collect();
        StereoCloud::new("pair_03", points).unwrap()
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair_03.bin");
        write_cloud(&path, &cloud(), DEFAULT_CLOUD_FRAME, None).unwrap();
        let (back, header) = read_cloud(&path).unwrap();
        assert_eq!(back, cloud());
        assert_eq!(header.count, 5);
        assert_eq!(header.frame, "local_enu");
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 160);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair_03.csv");
        write_cloud_csv(&path, &cloud()).unwrap();
        assert_eq!(read_cloud_csv(&path).unwrap(), cloud());
    }

    #[test]
    fn count_mismatch_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        write_cloud(&path, &cloud(), DEFAULT_CLOUD_FRAME, None).unwrap();
        std::fs::write(&path, [0u8; 40]).unwrap();
        assert!(matches!(read_cloud(&path).unwrap_err(), Error::Format { .. }));
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "x,y,z,p\n1,2,3\n").unwrap();
        assert!(read_cloud_csv(&path).is_err());
        std::fs::write(&path, "x,y,z,p\n1,2,3,1.5\n").unwrap();
        assert!(read_cloud_csv(&path).is_err());
    }
}
