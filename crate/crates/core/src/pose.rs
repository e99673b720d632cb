//! Satellite position, orbital (icr) and sensor frames from image metadata;
//! pose covariance with same-pass correlation; propagation to ray-origin
//! displacement covariance.
//!
//! Pose error per image is `(dI, dC, dR, ω, φ, κ)`: position error in the
//! in-track / cross-track / radial frame and small attitude angles about the
//! sensor `U, V, W` axes. Attitude angles are rotations of the reference frame,
//! so a positive `φ` moves the ray toward `+û` and a positive `ω` toward `−v̂`.
//! `κ` (about the boresight) does not move the ray and is dropped, leaving five
//! parameters per image.

use nalgebra::{DMatrix, Rotation3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{enu_to_ecf_rotation, geodetic_to_ecf, EcfVector, GeodeticPoint, WGS84};
use crate::linalg::{check_psd, symmetrize, Mat3, Vec3};

/// Pose parameters kept per image.
pub const POSE_PARAMS: usize = 5;
/// Default same-pass correlation coefficient.
pub const DEFAULT_RHO: f64 = 0.8;

/// Unit vector from the ground origin toward the satellite in enu, for
/// azimuth clockwise from North and elevation above the tangent plane (radians).
pub fn satellite_direction_enu(azimuth: f64, elevation: f64) -> Vec3 {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vec3::new(ce * sa, ce * ca, se)
}

/// Intersects the ray `R_o + k û_o` with the orbit sphere `|R| = R_t` and
/// returns the satellite position for the positive root `k`.
pub fn satellite_position(r_o: &EcfVector, u_o: &Vec3, orbit_radius: f64) -> Result<EcfVector> {
    let u = u_o.normalize();
    let b = r_o.0.dot(&u);
    if b <= 0.0 {
        return Err(Error::DegenerateGeometry("satellite direction points below the horizon".into()));
    }
    let c = r_o.0.norm_squared() - orbit_radius * orbit_radius;
    if c >= 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "orbit radius {orbit_radius} does not exceed the ground radius {}",
            r_o.norm()
        )));
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return Err(Error::DegenerateGeometry("ray does not meet the orbit sphere".into()));
    }
    // Both forms of the root are algebraically equal; the second avoids
    // cancellation when k ≪ |R_o|.
    let k = -c / (b + disc.sqrt());
    Ok(EcfVector(r_o.0 + u * k))
}

/// In-track / cross-track / radial frame at the satellite. Columns of the
/// returned rotation are `(î, ĉ, r̂)` in ecf. The ground track heads
/// `θ = 360° − inclination` counter-clockwise from East (descending pass).
pub fn icr_frame(r_s: &EcfVector, inclination: f64) -> Result<Rotation3<f64>> {
    let z_u = r_s.0.normalize();
    let x_raw = Vec3::z().cross(&z_u);
    if x_raw.norm() <= 1e-9 {
        return Err(Error::DegenerateGeometry("satellite lies over a pole; icr frame undefined".into()));
    }
    let x_u = x_raw.normalize();
    let y_u = z_u.cross(&x_u);
    let theta = ground_track_angle(inclination);
    let v_ecf = x_u * theta.cos() + y_u * theta.sin();
    let i_hat = v_ecf.normalize();
    let c_raw = r_s.0.cross(&i_hat);
    if c_raw.norm() <= 1e-9 * r_s.norm() {
        return Err(Error::DegenerateGeometry("ground track parallel to radial vector".into()));
    }
    let c_hat = c_raw.normalize();
    let r_hat = i_hat.cross(&c_hat);
    Ok(Rotation3::from_matrix_unchecked(Mat3::from_columns(&[i_hat, c_hat, r_hat])))
}

/// Counter-clockwise ground-track angle from East for a descending pass.
pub fn ground_track_angle(inclination: f64) -> f64 {
    std::f64::consts::TAU - inclination
}

/// Sensor attitude: `M` (ecf → sensor, rows `sX̂, sŶ, sẐ`) and
/// `M_enu` (enu → sensor).
pub fn sensor_frame(
    r_s: &EcfVector,
    r_o: &EcfVector,
    scan_enu: &Vec3,
    origin: &GeodeticPoint,
) -> Result<(Rotation3<f64>, Rotation3<f64>)> {
    let los = r_s.0 - r_o.0;
    if !(los.norm() > 0.0) {
        return Err(Error::DegenerateGeometry("satellite coincides with the ground origin".into()));
    }
    let t_enu = enu_to_ecf_rotation(origin);
    let s_ecf = t_enu * scan_enu;
    let z = los.normalize();
    let y_raw = z.cross(&s_ecf);
    if y_raw.norm() <= 1e-9 * s_ecf.norm() {
        return Err(Error::DegenerateGeometry("scan direction parallel to line of sight".into()));
    }
    let y = y_raw.normalize();
    let x = y.cross(&z);
    let m = Rotation3::from_matrix_unchecked(Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]));
    let m_enu = Rotation3::from_matrix_unchecked(m.matrix() * t_enu.matrix());
    Ok((m, m_enu))
}

/// Per-image pose error description (variances).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseErrorSpec {
    /// Position variance per axis (m²).
    pub var_pos: f64,
    /// Attitude variances (rad²).
    pub var_omega: f64,
    pub var_phi: f64,
    pub var_kappa: f64,
    /// Same-pass correlation coefficient.
    pub rho: f64,
}

impl PoseErrorSpec {
    pub fn from_sigmas(pos_m: f64, omega_rad: f64, phi_rad: f64, kappa_rad: f64, rho: f64) -> Self {
        PoseErrorSpec {
            var_pos: pos_m * pos_m,
            var_omega: omega_rad * omega_rad,
            var_phi: phi_rad * phi_rad,
            var_kappa: kappa_rad * kappa_rad,
            rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vars = [self.var_pos, self.var_omega, self.var_phi, self.var_kappa];
        if vars.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("pose variances must be finite and non-negative".into()));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidInput(format!("correlation {} outside (-1, 1)", self.rho)));
        }
        Ok(())
    }

    /// Standard deviations of the five retained parameters.
    pub fn sigmas5(&self) -> [f64; POSE_PARAMS] {
        [
            self.var_pos.sqrt(),
            self.var_pos.sqrt(),
            self.var_pos.sqrt(),
            self.var_omega.sqrt(),
            self.var_phi.sqrt(),
        ]
    }
}

/// Satellite platforms with published position / attitude accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Platform {
    #[serde(rename = "GeoEye-1")]
    GeoEye1,
    QuickBird,
    WorldView1,
    WorldView2,
    WorldView3,
}

impl Platform {
    pub const ALL: [Platform; 5] = [
        Platform::GeoEye1,
        Platform::QuickBird,
        Platform::WorldView1,
        Platform::WorldView2,
        Platform::WorldView3,
    ];

    /// `(position std. dev. m, attitude std. dev. rad)`.
    pub fn sigmas(self) -> (f64, f64) {
        match self {
            Platform::GeoEye1 => (0.7071, 2e-6),
            Platform::QuickBird => (1.0, 23.203e-6),
            Platform::WorldView1 => (0.7071, 3.742e-6),
            Platform::WorldView2 | Platform::WorldView3 => (0.7071, 2.83e-6),
        }
    }

    /// Pose error preset. `κ` variance is twice the `ω, φ` variance, as in the
    /// WorldView3 example; it never enters the propagation.
    pub fn pose_error(self, rho: f64) -> PoseErrorSpec {
        let (pos, att) = self.sigmas();
        PoseErrorSpec::from_sigmas(pos, att, att, att * 2f64.sqrt(), rho)
    }

    pub fn name(self) -> &'static str {
        match self {
            Platform::GeoEye1 => "GeoEye-1",
            Platform::QuickBird => "QuickBird",
            Platform::WorldView1 => "WorldView1",
            Platform::WorldView2 => "WorldView2",
            Platform::WorldView3 => "WorldView3",
        }
    }
}

/// Image acquisition geometry (angles in radians).
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePoseSpec {
    pub id: String,
    pub pass_id: String,
    pub azimuth: f64,
    pub elevation: f64,
    pub altitude: f64,
    pub inclination: f64,
    /// Scan direction as a unit vector in the enu frame at `origin`.
    pub scan_enu: Vec3,
    pub origin: GeodeticPoint,
    pub errors: PoseErrorSpec,
}

impl ImagePoseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.elevation > 0.0 && self.elevation <= std::f64::consts::FRAC_PI_2 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "image {}: elevation must be in (0, 90] degrees",
                self.id
            )));
        }
        if !(self.altitude > 0.0) {
            return Err(Error::InvalidInput(format!("image {}: altitude must be positive", self.id)));
        }
        if !(self.scan_enu.norm() > 0.0) {
            return Err(Error::InvalidInput(format!("image {}: zero scan direction", self.id)));
        }
        self.errors.validate()
    }

    /// Scan unit vector in enu from an angle counter-clockwise from East.
    pub fn scan_from_angle(theta: f64) -> Vec3 {
        Vec3::new(theta.cos(), theta.sin(), 0.0)
    }
}

/// Satellite position and attitude frames for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteState {
    pub r_s: EcfVector,
    pub r_o: EcfVector,
    pub icr_to_ecf: Rotation3<f64>,
    /// `M`: ecf → sensor.
    pub ecf_to_sensor: Rotation3<f64>,
    /// `M_enu`: enu (at the image origin) → sensor.
    pub enu_to_sensor: Rotation3<f64>,
    /// `|R|`, sensor-to-scene distance (m).
    pub slant_range: f64,
}

impl SatelliteState {
    /// Full construction from image metadata, using the ellipsoid for the
    /// ground origin and the sphere `R_e + H_s` for the orbit.
    pub fn from_pose(spec: &ImagePoseSpec) -> Result<Self> {
        spec.validate()?;
        let r_o = geodetic_to_ecf(&spec.origin);
        let u_s = satellite_direction_enu(spec.azimuth, spec.elevation);
        let u_o = enu_to_ecf_rotation(&spec.origin) * u_s;
        let r_s = satellite_position(&r_o, &u_o, WGS84.mean_radius + spec.altitude)?;
        let icr = icr_frame(&r_s, spec.inclination)?;
        let (m, m_enu) = sensor_frame(&r_s, &r_o, &spec.scan_enu, &spec.origin)?;
        Ok(SatelliteState {
            slant_range: (r_s.0 - r_o.0).norm(),
            r_s,
            r_o,
            icr_to_ecf: icr,
            ecf_to_sensor: m,
            enu_to_sensor: m_enu,
        })
    }

    /// Sensor axes `(sX̂, sŶ, sẐ)` in ecf.
    pub fn sensor_axes_ecf(&self) -> [Vec3; 3] {
        let m = self.ecf_to_sensor.matrix();
        [0, 1, 2].map(|k| m.row(k).transpose())
    }

    /// Same state with a different slant range.
    pub fn with_slant_range(mut self, slant_range: f64) -> Self {
        self.slant_range = slant_range;
        self
    }

    /// The 2×5 block of the displacement Jacobian: rows `(ε_u, ε_v)`,
    /// columns `(dI, dC, dR, ω, φ)`.
    pub fn jacobian_block(&self) -> nalgebra::SMatrix<f64, 2, 5> {
        let pos = self.ecf_to_sensor.matrix() * self.icr_to_ecf.matrix();
        let r = self.slant_range;
        let mut b = nalgebra::SMatrix::<f64, 2, 5>::zeros();
        for j in 0..3 {
            b[(0, j)] = pos[(0, j)];
            b[(1, j)] = pos[(1, j)];
        }
        b[(0, 4)] = r;
        b[(1, 3)] = -r;
        b
    }
}

/// Joint `5n × 5n` covariance of `(dI, dC, dR, ω, φ)` across `n` images.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseCovariance {
    pub n: usize,
    pub matrix: DMatrix<f64>,
}

/// Joint `2n × 2n` covariance of `(ε_u, ε_v)` across `n` rays (m²).
#[derive(Debug, Clone, PartialEq)]
pub struct RayCovariance(pub DMatrix<f64>);

impl RayCovariance {
    pub fn n_rays(&self) -> usize {
        self.0.nrows() / 2
    }

    /// `σ²·I` for `n` rays.
    pub fn isotropic(n: usize, variance: f64) -> Self {
        RayCovariance(DMatrix::identity(2 * n, 2 * n) * variance)
    }
}

/// One image's contribution to the pose covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseErrorEntry {
    pub errors: PoseErrorSpec,
    pub pass_id: String,
}

fn pass_rho(entries: &[PoseErrorEntry]) -> Result<Vec<f64>> {
    // Every image in a pass must agree on ρ.
    let mut by_pass: Vec<(&str, f64)> = Vec::new();
    for e in entries {
        e.errors.validate()?;
        match by_pass.iter().find(|(p, _)| *p == e.pass_id) {
            Some((_, r)) if *r != e.errors.rho => {
                return Err(Error::InvalidInput(format!(
                    "pass {} has inconsistent correlation coefficients ({} vs {})",
                    e.pass_id, r, e.errors.rho
                )))
            }
            Some(_) => {}
            None => by_pass.push((&e.pass_id, e.errors.rho)),
        }
    }
    Ok(entries.iter().map(|e| e.errors.rho).collect())
}

fn assemble(entries: &[PoseErrorEntry], sigmas: impl Fn(&PoseErrorSpec) -> Vec<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = entries.len();
    if n == 0 {
        return Err(Error::InvalidInput("pose covariance needs at least one image".into()));
    }
    let rho = pass_rho(entries)?;
    let mut s = DMatrix::zeros(k * n, k * n);
    for i in 0..n {
        let si = sigmas(&entries[i].errors);
        for j in 0..n {
            let corr = if i == j {
                1.0
            } else if entries[i].pass_id == entries[j].pass_id {
                rho[i]
            } else {
                continue;
            };
            let sj = sigmas(&entries[j].errors);
            for p in 0..k {
                s[(k * i + p, k * j + p)] = corr * si[p] * sj[p];
            }
        }
    }
    check_psd(&s, 1e-10, "pose covariance")?;
    Ok(s)
}

/// Block covariance with `ρ·σᵢσⱼ` cross terms, per parameter, for images
/// sharing a pass, and zero otherwise.
pub fn assemble_pose_covariance(entries: &[PoseErrorEntry]) -> Result<PoseCovariance> {
    let matrix = assemble(entries, |e| e.sigmas5().to_vec(), POSE_PARAMS)?;
    Ok(PoseCovariance { n: entries.len(), matrix })
}

/// The `6n × 6n` form including `κ`, as used by classical geopositioning.
pub fn assemble_pose_covariance_with_kappa(entries: &[PoseErrorEntry]) -> Result<DMatrix<f64>> {
    assemble(
        entries,
        |e| {
            let mut s = e.sigmas5().to_vec();
            s.push(e.var_kappa.sqrt());
            s
        },
        6,
    )
}

/// Block-diagonal `2n × 5n` Jacobian of ray displacements with respect to pose.
pub fn ray_displacement_jacobian(states: &[SatelliteState]) -> DMatrix<f64> {
    let n = states.len();
    let mut j = DMatrix::zeros(2 * n, POSE_PARAMS * n);
    for (i, s) in states.iter().enumerate() {
        j.view_mut((2 * i, POSE_PARAMS * i), (2, POSE_PARAMS))
            .copy_from(&s.jacobian_block());
    }
    j
}

/// Same Jacobian padded with a zero `κ` column per image (`2n × 6n`).
pub fn ray_displacement_jacobian_with_kappa(states: &[SatelliteState]) -> DMatrix<f64> {
    let n = states.len();
    let mut j = DMatrix::zeros(2 * n, 6 * n);
    for (i, s) in states.iter().enumerate() {
        j.view_mut((2 * i, 6 * i), (2, POSE_PARAMS)).copy_from(&s.jacobian_block());
    }
    j
}

/// `S_ε = J S_φ Jᵀ`, symmetrized.
pub fn ray_covariance(jacobian: &DMatrix<f64>, pose: &PoseCovariance) -> Result<RayCovariance> {
    if jacobian.ncols() != pose.matrix.nrows() {
        return Err(Error::InvalidInput(format!(
            "Jacobian has {} columns but pose covariance is {}×{}",
            jacobian.ncols(),
            pose.matrix.nrows(),
            pose.matrix.ncols()
        )));
    }
    Ok(RayCovariance(symmetrize(&(jacobian * &pose.matrix * jacobian.transpose()))))
}
