//! WGS84 ellipsoid constants and transforms among geodetic, Earth-centered
//! Earth-fixed (ecf) and local East-North-Up (enu) coordinates.
//!
//! Angles are held in radians; degrees appear only in constructors, accessors
//! and the serialized form.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};

/// WGS84 semi-major axis (m).
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 semi-minor axis (m).
pub const WGS84_B: f64 = 6_356_752.314_245_18;
/// Nominal mean Earth radius (m) used for the spherical orbit model.
pub const EARTH_MEAN_RADIUS: f64 = 6_371_000.0;

const INVERSE_MAX_ITER: usize = 10;
const INVERSE_TOL_RAD: f64 = 1e-12;

/// Ellipsoid and sphere radii. The ellipsoid places ground points; the sphere
/// carries the orbit radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidConstants {
    pub a: f64,
    pub b: f64,
    pub mean_radius: f64,
}

pub const WGS84: EllipsoidConstants = EllipsoidConstants {
    a: WGS84_A,
    b: WGS84_B,
    mean_radius: EARTH_MEAN_RADIUS,
};

impl EllipsoidConstants {
    /// First eccentricity squared.
    pub fn e2(&self) -> f64 {
        1.0 - (self.b * self.b) / (self.a * self.a)
    }

    fn prime_vertical_radius(&self, sin_lat: f64) -> f64 {
        self.a / (1.0 - self.e2() * sin_lat * sin_lat).sqrt()
    }
}

/// A point on or above the WGS84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeodeticDegrees", into = "GeodeticDegrees")]
pub struct GeodeticPoint {
    /// Longitude, radians.
    pub lon: f64,
    /// Latitude, radians.
    pub lat: f64,
    /// Height above the ellipsoid, meters.
    pub h: f64,
}

/// Serialized form of [`GeodeticPoint`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct GeodeticDegrees {
    lon: f64,
    lat: f64,
    #[serde(default)]
    h: f64,
}

impl TryFrom<GeodeticDegrees> for GeodeticPoint {
    type Error = Error;

    fn try_from(d: GeodeticDegrees) -> Result<Self> {
        GeodeticPoint::from_degrees(d.lon, d.lat, d.h)
    }
}

impl From<GeodeticPoint> for GeodeticDegrees {
    fn from(p: GeodeticPoint) -> Self {
        GeodeticDegrees {
            lon: p.lon_deg(),
            lat: p.lat_deg(),
            h: p.h,
        }
    }
}

impl GeodeticPoint {
    pub fn from_degrees(lon_deg: f64, lat_deg: f64, h: f64) -> Result<Self> {
        if !(-180.0..=180.0).contains(&lon_deg) || !(-90.0..=90.0).contains(&lat_deg) || !h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "geodetic point out of range: lon {lon_deg}, lat {lat_deg}, h {h}"
            )));
        }
        Ok(GeodeticPoint {
            lon: lon_deg.to_radians(),
            lat: lat_deg.to_radians(),
            h,
        })
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon.to_degrees()
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat.to_degrees()
    }
}

/// A position or displacement in the Earth-centered Earth-fixed frame (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcfVector(pub Vec3);

impl EcfVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        EcfVector(Vec3::new(x, y, z))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

pub fn geodetic_to_ecf(p: &GeodeticPoint) -> EcfVector {
    let (sin_lat, cos_lat) = p.lat.sin_cos();
    let (sin_lon, cos_lon) = p.lon.sin_cos();
    let n = WGS84.prime_vertical_radius(sin_lat);
    let b2_a2 = (WGS84.b * WGS84.b) / (WGS84.a * WGS84.a);
    EcfVector::new(
        (n + p.h) * cos_lat * cos_lon,
        (n + p.h) * cos_lat * sin_lon,
        (n * b2_a2 + p.h) * sin_lat,
    )
}

/// Iterative inverse of [`geodetic_to_ecf`]: Bowring's starting latitude,
/// then fixed-point refinement until the latitude update drops below 1e-12 rad
/// (at most 10 passes). On the polar axis longitude is reported as 0.
pub fn ecf_to_geodetic(v: &EcfVector) -> Result<GeodeticPoint> {
    let [x, y, z] = [v.0.x, v.0.y, v.0.z];
    if !(x.is_finite() && y.is_finite() && z.is_finite()) || v.norm() < WGS84.b / 2.0 {
        return Err(Error::DegenerateGeometry(format!(
            "ecf point {:?} is too close to the Earth center for geodetic conversion",
            v.0
        )));
    }
    let (a, b) = (WGS84.a, WGS84.b);
    let e2 = WGS84.e2();
    let ep2 = (a * a) / (b * b) - 1.0;
    let p = x.hypot(y);
    let lon = if p > 0.0 { y.atan2(x) } else { 0.0 };

    let theta = (z * a).atan2(p * b);
    let (st, ct) = theta.sin_cos();
    let mut lat = (z + ep2 * b * st.powi(3)).atan2(p - e2 * a * ct.powi(3));
    let mut h = height_at(p, z, lat);
    for _ in 0..INVERSE_MAX_ITER {
        let n = WGS84.prime_vertical_radius(lat.sin());
        let next = z.atan2(p * (1.0 - e2 * n / (n + h)));
        let step = (next - lat).abs();
        lat = next;
        h = height_at(p, z, lat);
        if step < INVERSE_TOL_RAD {
            break;
        }
    }
    Ok(GeodeticPoint { lon, lat, h })
}

fn height_at(p: f64, z: f64, lat: f64) -> f64 {
    let (s, c) = lat.sin_cos();
    p * c + z * s - WGS84.a * (1.0 - WGS84.e2() * s * s).sqrt()
}

/// Rotation taking enu components at `origin` to ecf components. Columns are
/// the East, North and Up unit vectors expressed in ecf.
pub fn enu_to_ecf_rotation(origin: &GeodeticPoint) -> Rotation3<f64> {
    let (sl, cl) = origin.lon.sin_cos();
    let (sp, cp) = origin.lat.sin_cos();
    #[rustfmt::skip]
    let m = Mat3::new(
        -sl, -sp * cl, cp * cl,
         cl, -sp * sl, cp * sl,
        0.0,       cp,      sp,
    );
    Rotation3::from_matrix_unchecked(m)
}

/// True when `m` is orthonormal with determinant +1 to within `tol`.
pub fn is_proper_rotation(m: &Mat3, tol: f64) -> bool {
    (m.transpose() * m - Mat3::identity()).abs().max() <= tol && (m.determinant() - 1.0).abs() <= tol
}

/// A local tangent-plane (enu) frame anchored at a geodetic origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: GeodeticPoint,
    pub origin_ecf: EcfVector,
    enu_to_ecf: Rotation3<f64>,
}

impl LocalFrame {
    pub fn new(origin: GeodeticPoint) -> Self {
        LocalFrame {
            origin,
            origin_ecf: geodetic_to_ecf(&origin),
            enu_to_ecf: enu_to_ecf_rotation(&origin),
        }
    }

    pub fn enu_to_ecf(&self) -> &Rotation3<f64> {
        &self.enu_to_ecf
    }

    /// Rotates an ecf direction into enu components.
    pub fn vector_to_enu(&self, v: &Vec3) -> Vec3 {
        self.enu_to_ecf.inverse_transform_vector(v)
    }

    pub fn vector_to_ecf(&self, v: &Vec3) -> Vec3 {
        self.enu_to_ecf * v
    }

    pub fn point_to_enu(&self, p: &EcfVector) -> Vec3 {
        self.vector_to_enu(&(p.0 - self.origin_ecf.0))
    }

    pub fn point_to_ecf(&self, enu: &Vec3) -> EcfVector {
        EcfVector(self.origin_ecf.0 + self.vector_to_ecf(enu))
    }

    pub fn enu_to_geodetic(&self, enu: &Vec3) -> Result<GeodeticPoint> {
        ecf_to_geodetic(&self.point_to_ecf(enu))
    }

    pub fn geodetic_to_enu(&self, p: &GeodeticPoint) -> Vec3 {
        self.point_to_enu(&geodetic_to_ecf(p))
    }
}
