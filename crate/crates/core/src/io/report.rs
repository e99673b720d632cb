//! Intersection report document.

use serde::{Deserialize, Serialize};

use super::Provenance;
use crate::intersect::{ErrorEllipsoid, IntersectionResult};
use crate::linalg::{mat3_row_major, Mat3};

/// Confidence ellipsoid as written to reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidReport {
    pub confidence: f64,
    /// Descending semi-axis lengths (m).
    pub semi_axes: [f64; 3],
    /// Row-major 3×3 matrix whose columns are the axis directions.
    pub rotation: [f64; 9],
}

impl From<&ErrorEllipsoid> for EllipsoidReport {
    fn from(e: &ErrorEllipsoid) -> Self {
        EllipsoidReport {
            confidence: e.confidence,
            semi_axes: e.semi_axes,
            rotation: mat3_row_major(e.orientation.matrix()),
        }
    }
}

/// Point estimate, covariance and ellipsoid for one intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    #[serde(rename = "X_enu")]
    pub x_enu: [f64; 3],
    /// Row-major covariance (m²).
    #[serde(rename = "P")]
    pub p: [f64; 9],
    pub ellipsoid: EllipsoidReport,
    /// Perpendicular distance from the point to each ray (m).
    pub residuals: Vec<f64>,
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
    pub condition_number: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl IntersectionReport {
    pub fn new(result: &IntersectionResult, covariance: &Mat3, ellipsoid: &ErrorEllipsoid) -> Self {
        IntersectionReport {
            x_enu: result.point.into(),
            p: mat3_row_major(covariance),
            ellipsoid: ellipsoid.into(),
            residuals: result.distances.clone(),
            seed: None,
            n_samples: None,
            condition_number: result.condition_number,
            warnings: result.warnings.clone(),
            provenance: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intersect::{error_ellipsoid, intersect_weighted, RayBundle};
    use crate::linalg::Vec3;
    use crate::rpc::{Ray, RayFrame};

    #[test]
    fn report_has_documented_keys() {
        let rays = [Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0), Vec3::new(-1.0, -1.0, 1.0)]
            .iter()
            .map(|d| Ray::new(Vec3::zeros(), *d, RayFrame::Altitude { altitude: 620e3 }).unwrap())
            .collect();
        let bundle = RayBundle::new(rays, None).unwrap();
        let r = intersect_weighted(&bundle).unwrap();
        let e = error_ellipsoid(r.point, &r.covariance, 0.9).unwrap();
        let report = IntersectionReport::new(&r, &r.covariance, &e);
        let v = serde_json::to_value(&report).unwrap();
        for key in ["X_enu", "P", "ellipsoid", "residuals", "seed", "n_samples"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["P"].as_array().unwrap().len(), 9);
        assert_eq!(v["ellipsoid"]["rotation"].as_array().unwrap().len(), 9);
        let back: IntersectionReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, report);
    }
}
