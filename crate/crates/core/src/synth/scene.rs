//! Scene configurations, synthetic surfaces and ray bundles through a known
//! point.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{GeodeticPoint, LocalFrame};
use crate::intersect::{RayBundle, WARN_CONDITION};
use crate::linalg::Vec3;
use crate::pose::{
    assemble_pose_covariance, ground_track_angle, ray_covariance, ray_displacement_jacobian, ImagePoseSpec, Platform,
    PoseCovariance, PoseErrorEntry, PoseErrorSpec, SatelliteState, DEFAULT_RHO,
};
use crate::rpc::{Ray, RayFrame};

/// Nominal orbit altitude used when an image does not give one (m).
pub const DEFAULT_ALTITUDE: f64 = 620_000.0;
/// Nominal orbit inclination used when an image does not give one (deg).
pub const DEFAULT_INCLINATION_DEG: f64 = 97.7783;
/// Distance of each ray origin from the truth point along the ray (m).
pub const RAY_ORIGIN_OFFSET: f64 = 100.0;

fn default_altitude() -> f64 {
    DEFAULT_ALTITUDE
}

fn default_inclination() -> f64 {
    DEFAULT_INCLINATION_DEG
}

fn default_rho() -> f64 {
    DEFAULT_RHO
}

/// Explicit pose standard deviations for one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorConfig {
    pub pos_m: f64,
    pub omega_rad: f64,
    pub phi_rad: f64,
    #[serde(default)]
    pub kappa_rad: f64,
}

/// One image of a scene configuration (angles in degrees).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageConfig {
    pub id: String,
    pub pass_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<Platform>,
    /// Clockwise from North.
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    #[serde(default = "default_altitude")]
    pub altitude_m: f64,
    #[serde(default = "default_inclination")]
    pub inclination_deg: f64,
    /// Scan direction counter-clockwise from East; defaults to the ground track.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_theta_deg: Option<f64>,
    /// Overrides the platform preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<ErrorConfig>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Displacement `(ε_u, ε_v)` of this image's ray (m).
    #[serde(default)]
    pub ray_offset_m: [f64; 2],
}

impl ImageConfig {
    pub fn pose_errors(&self) -> Result<PoseErrorSpec> {
        let e = match (self.sigmas, self.platform) {
            (Some(e), _) => PoseErrorSpec::from_sigmas(e.pos_m, e.omega_rad, e.phi_rad, e.kappa_rad, self.rho),
            (None, Some(p)) => p.pose_error(self.rho),
            (None, None) => {
                return Err(Error::InvalidInput(format!(
                    "image {}: give either a platform or explicit sigmas",
                    self.id
                )))
            }
        };
        e.validate()?;
        Ok(e)
    }

    pub fn to_pose(&self, origin: GeodeticPoint) -> Result<ImagePoseSpec> {
        let inclination = self.inclination_deg.to_radians();
        let scan = self.scan_theta_deg.map_or_else(|| ground_track_angle(inclination), f64::to_radians);
        let spec = ImagePoseSpec {
            id: self.id.clone(),
            pass_id: self.pass_id.clone(),
            azimuth: self.azimuth_deg.to_radians(),
            elevation: self.elevation_deg.to_radians(),
            altitude: self.altitude_m,
            inclination,
            scan_enu: ImagePoseSpec::scan_from_angle(scan),
            origin,
            errors: self.pose_errors()?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Height field over the local `(x, y)` plane (m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    /// `z = z0 + sx·x + sy·y`.
    Plane { z0: f64, sx: f64, sy: f64 },
    /// `low` for `x < edge`, `high` otherwise.
    Step { edge: f64, low: f64, high: f64 },
    /// Ridge parallel to `x` at `y = ridge`, falling linearly to `eave` at
    /// `|y − ridge| = half_width` and `base` beyond it.
    Gable {
        ridge: f64,
        half_width: f64,
        eave: f64,
        top: f64,
        base: f64,
    },
    /// Sum of the components.
    Sum { parts: Vec<Surface> },
}

impl Surface {
    pub fn flat(z: f64) -> Self {
        Surface::Plane { z0: z, sx: 0.0, sy: 0.0 }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        match self {
            Surface::Plane { z0, sx, sy } => z0 + sx * x + sy * y,
            Surface::Step { edge, low, high } => {
                if x < *edge {
                    *low
                } else {
                    *high
                }
            }
            Surface::Gable {
                ridge,
                half_width,
                eave,
                top,
                base,
            } => {
                let d = (y - ridge).abs();
                if d <= *half_width {
                    top + (eave - top) * d / half_width
                } else {
                    *base
                }
            }
            Surface::Sum { parts } => parts.iter().map(|p| p.height(x, y)).sum(),
        }
    }
}

/// A full scene: images around a local origin and the truth point they view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub origin: GeodeticPoint,
    /// Truth point in the enu frame at `origin` (m).
    pub truth_enu: [f64; 3],
    pub images: Vec<ImageConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<Surface>,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.images.len() < 2 {
            return Err(Error::InvalidInput(format!("a scene needs at least 2 images, got {}", self.images.len())));
        }
        if !self.truth_enu.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("truth point must be finite".into()));
        }
        for im in &self.images {
            im.to_pose(self.origin)?;
        }
        Ok(())
    }

    pub fn poses(&self) -> Result<Vec<ImagePoseSpec>> {
        self.images.iter().map(|im| im.to_pose(self.origin)).collect()
    }

    pub fn truth(&self) -> Vec3 {
        Vec3::from(self.truth_enu)
    }
}

/// Rays of a scene together with the pose model behind their covariance.
#[derive(Debug, Clone)]
pub struct SceneRays {
    pub bundle: RayBundle,
    pub states: Vec<SatelliteState>,
    /// `2n × 5n` displacement Jacobian.
    pub jacobian: DMatrix<f64>,
    pub pose: PoseCovariance,
    /// Pose covariance including `κ` (`6n × 6n`).
    pub pose_with_kappa: DMatrix<f64>,
    pub truth: Vec3,
    pub condition_number: f64,
    pub warnings: Vec<String>,
}

/// One ray per image through the truth point (before any configured
/// offsets), with `û` along the sensor `X` axis, the slant range from the
/// satellite, and `S_ε = J S_φ Jᵀ` attached.
pub fn make_ray_bundle(scene: &SceneConfig) -> Result<SceneRays> {
    scene.validate()?;
    let frame = LocalFrame::new(scene.origin);
    let truth = scene.truth();
    let truth_ecf = frame.point_to_ecf(&truth);
    let poses = scene.poses()?;
    let mut rays = Vec::with_capacity(poses.len());
    let mut states = Vec::with_capacity(poses.len());
    for (pose, im) in poses.iter().zip(&scene.images) {
        let nominal = SatelliteState::from_pose(pose)?;
        let los = nominal.r_s.0 - truth_ecf.0;
        let slant = los.norm();
        let dir = frame.vector_to_enu(&(los / slant));
        let x_axis = nominal.enu_to_sensor.matrix().row(0).transpose();
        let ray = Ray::new(
            truth + dir * RAY_ORIGIN_OFFSET,
            dir,
            RayFrame::Sensor {
                x_axis,
                slant_range: slant,
            },
        )?;
        rays.push(ray.displaced(im.ray_offset_m[0], im.ray_offset_m[1]));
        states.push(nominal.with_slant_range(slant));
    }
    let entries: Vec<PoseErrorEntry> = poses
        .iter()
        .map(|p| PoseErrorEntry {
            errors: p.errors,
            pass_id: p.pass_id.clone(),
        })
        .collect();
    let pose = assemble_pose_covariance(&entries)?;
    let pose_with_kappa = crate::pose::assemble_pose_covariance_with_kappa(&entries)?;
    let jacobian = ray_displacement_jacobian(&states);
    let cov = ray_covariance(&jacobian, &pose)?;
    let bundle = RayBundle::new(rays, Some(cov))?;
    let normal = bundle.normal_matrix();
    let eig = nalgebra::SymmetricEigen::new(normal).eigenvalues;
    let condition_number = if eig.min() > 0.0 { eig.max() / eig.min() } else { f64::INFINITY };
    let mut warnings = Vec::new();
    if condition_number > WARN_CONDITION {
        log::warn!("scene rays are poorly conditioned (condition number {condition_number:.3e})");
        warnings.push(format!("poorly conditioned ray geometry: condition number {condition_number:.3e}"));
    }
    Ok(SceneRays {
        bundle,
        states,
        jacobian,
        pose,
        pose_with_kappa,
        truth,
        condition_number,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intersect::intersect_unweighted;

    fn image(id: &str, pass: &str, az: f64, el: f64) -> ImageConfig {
        ImageConfig {
            id: id.into(),
            pass_id: pass.into(),
            platform: Some(Platform::WorldView3),
            azimuth_deg: az,
            elevation_deg: el,
            altitude_m: DEFAULT_ALTITUDE,
            inclination_deg: DEFAULT_INCLINATION_DEG,
            scan_theta_deg: None,
            sigmas: None,
            rho: DEFAULT_RHO,
            ray_offset_m: [0.0, 0.0],
        }
    }

    fn scene(images: Vec<ImageConfig>) -> SceneConfig {
        SceneConfig {
            origin: GeodeticPoint::from_degrees(-58.5859220, -34.4894120, 20.0).unwrap(),
            truth_enu: [12.0, -7.0, 3.0],
            images,
            surface: None,
        }
    }

    #[test]
    fn rays_pass_through_truth() {
        let s = scene(vec![image("a", "1", 10.0, 70.0), image("b", "2", 200.0, 60.0), image("c", "2", 100.0, 80.0)]);
        let r = make_ray_bundle(&s).unwrap();
        let x = intersect_unweighted(&r.bundle).unwrap();
        assert!((x - r.truth).norm() < 1e-9);
        for ray in r.bundle.rays() {
            assert!(ray.direction.z > 0.0);
            assert!(ray.u_axis.dot(&ray.direction).abs() < 1e-12);
        }
        assert_eq!(r.jacobian.shape(), (6, 15));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn ray_direction_points_at_satellite() {
        let s = scene(vec![image("a", "1", 30.0, 65.0), image("b", "2", 250.0, 75.0)]);
        let r = make_ray_bundle(&s).unwrap();
        let expect = crate::pose::satellite_direction_enu(30f64.to_radians(), 65f64.to_radians());
        // The truth point is a few meters from the origin: microradian agreement.
        assert!(r.bundle.rays()[0].direction.angle(&expect) < 1e-4);
    }

    #[test]
    fn near_parallel_pair_warns() {
        let s = scene(vec![image("a", "1", 0.0, 70.0), image("b", "2", 0.0, 70.5)]);
        let r = make_ray_bundle(&s).unwrap();
        assert!(r.condition_number > WARN_CONDITION);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn offsets_move_rays() {
        let mut b = image("b", "2", 200.0, 60.0);
        b.ray_offset_m = [0.3, -0.2];
        let r = make_ray_bundle(&scene(vec![image("a", "1", 10.0, 70.0), b])).unwrap();
        let ray = r.bundle.rays()[1];
        assert!((ray.distance_to(&r.truth) - 0.3f64.hypot(0.2)).abs() < 1e-9);
    }

    #[test]
    fn image_needs_error_model() {
        let mut a = image("a", "1", 10.0, 70.0);
        a.platform = None;
        assert!(make_ray_bundle(&scene(vec![a, image("b", "1", 0.0, 60.0)])).is_err());
        assert!(make_ray_bundle(&scene(vec![image("b", "1", 0.0, 60.0)])).is_err());
    }

    #[test]
    fn surfaces() {
        assert_eq!(Surface::flat(7.0).height(3.0, 4.0), 7.0);
        let step = Surface::Step { edge: 1.0, low: 0.0, high: 2.0 };
        assert_eq!((step.height(0.99, 0.0), step.height(1.0, 0.0)), (0.0, 2.0));
        let g = Surface::Gable {
            ridge: 0.0,
            half_width: 4.0,
            eave: 6.0,
            top: 8.0,
            base: 0.0,
        };
        assert_eq!((g.height(0.0, 0.0), g.height(0.0, 2.0), g.height(0.0, 5.0)), (8.0, 7.0, 0.0));
        let sum = Surface::Sum { parts: vec![Surface::flat(1.0), step] };
        assert_eq!(sum.height(2.0, 0.0), 3.0);
        let json = serde_json::to_string(&sum).unwrap();
        assert_eq!(serde_json::from_str::<Surface>(&json).unwrap(), sum);
    }
}
