//! Rational polynomial (RPC) projection, per-tile affine camera fitting and
//! geometric ray construction.
//!
//! Coefficients follow the conventional 20-term RPC00B ordering over the
//! normalized longitude `L`, latitude `P` and height `H`:
//!
//! ```text
//! 1, L, P, H, LP, LH, PH, L², P², H², PLH, L³, LP², LH², L²P, P³, PH², L²H, P²H, H³
//! ```
//!
//! Image coordinates are `(line, sample)`. The affine camera uses `u = sample`
//! and `v = line`, with 3-d points expressed in a local enu frame.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{GeodeticPoint, LocalFrame};
use crate::linalg::{any_orthogonal, Vec3};

pub const RPC_TERMS: usize = 20;
/// Soft validity window on normalized RPC inputs.
pub const RPC_VALIDITY: f64 = 1.5;
/// Default number of tile samples for the affine regression.
pub const DEFAULT_FIT_SAMPLES: usize = 100;

const NEWTON_MAX_ITER: usize = 20;
const DENOMINATOR_EPS: f64 = 1e-12;

/// The 20 cubic monomials in RPC00B order.
pub fn rpc_terms(l: f64, p: f64, h: f64) -> [f64; RPC_TERMS] {
    [
        1.0,
        l,
        p,
        h,
        l * p,
        l * h,
        p * h,
        l * l,
        p * p,
        h * h,
        p * l * h,
        l * l * l,
        l * p * p,
        l * h * h,
        l * l * p,
        p * p * p,
        p * h * h,
        l * l * h,
        p * p * h,
        h * h * h,
    ]
}

/// Partial derivatives of [`rpc_terms`] with respect to `L` and `P`.
fn rpc_terms_grad(l: f64, p: f64, h: f64) -> ([f64; RPC_TERMS], [f64; RPC_TERMS]) {
    let d_l = [
        0.0,
        1.0,
        0.0,
        0.0,
        p,
        h,
        0.0,
        2.0 * l,
        0.0,
        0.0,
        p * h,
        3.0 * l * l,
        p * p,
        h * h,
        2.0 * l * p,
        0.0,
        0.0,
        2.0 * l * h,
        0.0,
        0.0,
    ];
    let d_p = [
        0.0,
        0.0,
        1.0,
        0.0,
        l,
        0.0,
        h,
        0.0,
        2.0 * p,
        0.0,
        l * h,
        0.0,
        2.0 * l * p,
        0.0,
        l * l,
        3.0 * p * p,
        h * h,
        0.0,
        2.0 * p * h,
        0.0,
    ];
    (d_l, d_p)
}

fn dot20(c: &[f64; RPC_TERMS], t: &[f64; RPC_TERMS]) -> f64 {
    c.iter().zip(t).map(|(a, b)| a * b).sum()
}

/// An image position: `line` is the row coordinate, `sample` the column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageCoord {
    pub line: f64,
    pub sample: f64,
}

/// Third-order rational polynomial camera, RPC00B layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpcModel {
    pub line_off: f64,
    pub samp_off: f64,
    pub lat_off: f64,
    pub long_off: f64,
    pub height_off: f64,
    pub line_scale: f64,
    pub samp_scale: f64,
    pub lat_scale: f64,
    pub long_scale: f64,
    pub height_scale: f64,
    pub line_num_coeff: [f64; RPC_TERMS],
    pub line_den_coeff: [f64; RPC_TERMS],
    pub samp_num_coeff: [f64; RPC_TERMS],
    pub samp_den_coeff: [f64; RPC_TERMS],
}

impl RpcModel {
    pub fn validate(&self) -> Result<()> {
        let scales = [
            self.line_scale,
            self.samp_scale,
            self.lat_scale,
            self.long_scale,
            self.height_scale,
        ];
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidInput("RPC scales must be positive".into()));
        }
        if self.line_den_coeff[0] == 0.0 || self.samp_den_coeff[0] == 0.0 {
            return Err(Error::InvalidInput(
                "RPC denominator constant coefficients must be nonzero".into(),
            ));
        }
        let all = self
            .line_num_coeff
            .iter()
            .chain(&self.line_den_coeff)
            .chain(&self.samp_num_coeff)
            .chain(&self.samp_den_coeff);
        if all.into_iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("RPC coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Normalized `(L, P, H)` for a geodetic point (degrees and meters before
    /// normalization, as in RPC metadata).
    pub fn normalize(&self, p: &GeodeticPoint) -> [f64; 3] {
        [
            (p.lon_deg() - self.long_off) / self.long_scale,
            (p.lat_deg() - self.lat_off) / self.lat_scale,
            (p.h - self.height_off) / self.height_scale,
        ]
    }

    pub fn in_validity_window(&self, p: &GeodeticPoint) -> bool {
        self.normalize(p).iter().all(|v| v.abs() <= RPC_VALIDITY)
    }

    fn project_normalized(&self, l: f64, p: f64, h: f64) -> Result<(f64, f64)> {
        let t = rpc_terms(l, p, h);
        let ld = dot20(&self.line_den_coeff, &t);
        let sd = dot20(&self.samp_den_coeff, &t);
        for d in [ld, sd] {
            if d.abs() < DENOMINATOR_EPS {
                return Err(Error::ProjectionSingular(d.abs()));
            }
        }
        Ok((
            dot20(&self.line_num_coeff, &t) / ld,
            dot20(&self.samp_num_coeff, &t) / sd,
        ))
    }

    /// Forward projection from geodetic coordinates to `(line, sample)`.
    pub fn project(&self, p: &GeodeticPoint) -> Result<ImageCoord> {
        let [l, lat, h] = self.normalize(p);
        let (ln, sn) = self.project_normalized(l, lat, h)?;
        Ok(ImageCoord {
            line: ln * self.line_scale + self.line_off,
            sample: sn * self.samp_scale + self.samp_off,
        })
    }

    /// Normalized projection and its 2×2 Jacobian with respect to `(L, P)`.
    fn project_with_jacobian(&self, l: f64, p: f64, h: f64) -> Result<((f64, f64), Matrix2<f64>)> {
        let t = rpc_terms(l, p, h);
        let (tl, tp) = rpc_terms_grad(l, p, h);
        let mut out = [(0.0, [0.0; 2]); 2];
        for (k, (num, den)) in [
            (&self.line_num_coeff, &self.line_den_coeff),
            (&self.samp_num_coeff, &self.samp_den_coeff),
        ]
        .into_iter()
        .enumerate()
        {
            let n = dot20(num, &t);
            let d = dot20(den, &t);
            if d.abs() < DENOMINATOR_EPS {
                return Err(Error::ProjectionSingular(d.abs()));
            }
            let grad = |g: &[f64; RPC_TERMS]| (dot20(num, g) * d - n * dot20(den, g)) / (d * d);
            out[k] = (n / d, [grad(&tl), grad(&tp)]);
        }
        let jac = Matrix2::new(out[0].1[0], out[0].1[1], out[1].1[0], out[1].1[1]);
        Ok(((out[0].0, out[1].0), jac))
    }

    /// Solves `project(lon, lat, h) = target` for `(lon, lat)` at fixed height
    /// by 2-d Newton iteration in normalized coordinates.
    pub fn back_project_at_height(&self, target: ImageCoord, h: f64) -> Result<GeodeticPoint> {
        let hn = (h - self.height_off) / self.height_scale;
        let goal = Vector2::new(
            (target.line - self.line_off) / self.line_scale,
            (target.sample - self.samp_off) / self.samp_scale,
        );
        let mut x = Vector2::new(0.0, 0.0);
        for _ in 0..NEWTON_MAX_ITER {
            let ((ln, sn), jac) = self.project_with_jacobian(x[0], x[1], hn)?;
            let r = goal - Vector2::new(ln, sn);
            // 1e-12 px in normalized units; the solve stops once the residual
            // is at round-off level.
            let tol = 1e-12 / self.line_scale.max(self.samp_scale);
            if r.amax() <= tol {
                return self.denormalize_ground(x[0], x[1], h);
            }
            let step = jac
                .try_inverse()
                .ok_or_else(|| Error::DegenerateGeometry("singular RPC Jacobian during back-projection".into()))?
                * r;
            x += step;
            if step.amax() < 1e-15 {
                return self.denormalize_ground(x[0], x[1], h);
            }
        }
        let ((ln, sn), _) = self.project_with_jacobian(x[0], x[1], hn)?;
        let resid_px = ((goal[0] - ln) * self.line_scale).hypot((goal[1] - sn) * self.samp_scale);
        if resid_px < 1e-6 {
            return self.denormalize_ground(x[0], x[1], h);
        }
        Err(Error::NoConvergence {
            what: "RPC back-projection",
            iterations: NEWTON_MAX_ITER,
        })
    }

    fn denormalize_ground(&self, l: f64, p: f64, h: f64) -> Result<GeodeticPoint> {
        let lon = l * self.long_scale + self.long_off;
        let lat = p * self.lat_scale + self.lat_off;
        GeodeticPoint::from_degrees(lon, lat, h)
    }
}

/// Forward RPC projection.
pub fn rpc_project(m: &RpcModel, p: &GeodeticPoint) -> Result<ImageCoord> {
    m.project(p)
}

/// An axis-aligned box in local enu meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl TileBox {
    pub fn centered(center: Vec3, half_extent: Vec3) -> Self {
        TileBox {
            min: (center - half_extent).into(),
            max: (center + half_extent).into(),
        }
    }

    pub fn center(&self) -> Vec3 {
        (Vec3::from(self.min) + Vec3::from(self.max)) * 0.5
    }

    pub fn half_extent(&self) -> Vec3 {
        (Vec3::from(self.max) - Vec3::from(self.min)) * 0.5
    }

    fn validate(&self) -> Result<()> {
        if (0..3).any(|k| !(self.max[k] >= self.min[k]) || !self.min[k].is_finite() || !self.max[k].is_finite()) {
            return Err(Error::InvalidInput(format!("invalid tile box {self:?}")));
        }
        Ok(())
    }

    /// Uniform point in the box.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        Vec3::from_fn(|k, _| self.min[k] + (self.max[k] - self.min[k]) * rng.random::<f64>())
    }
}

/// Parallel-projection camera `[u v]ᵀ = [A₀; A₁] X + [a₀₃ a₁₃]ᵀ`, valid over a tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AffineCameraRecord", into = "AffineCameraRecord")]
pub struct AffineCamera {
    pub a0: Vec3,
    pub a03: f64,
    pub a1: Vec3,
    pub a13: f64,
    pub tile: TileBox,
    /// Inverse of the Gram matrix of `(A₀, A₁)`, computed once.
    gram_inv: Matrix2<f64>,
}

#[derive(Serialize, Deserialize)]
struct AffineCameraRecord {
    a0: [f64; 3],
    a03: f64,
    a1: [f64; 3],
    a13: f64,
    tile: TileBox,
}

impl TryFrom<AffineCameraRecord> for AffineCamera {
    type Error = Error;

    fn try_from(r: AffineCameraRecord) -> Result<Self> {
        AffineCamera::new(r.a0.into(), r.a03, r.a1.into(), r.a13, r.tile)
    }
}

impl From<AffineCamera> for AffineCameraRecord {
    fn from(c: AffineCamera) -> Self {
        AffineCameraRecord {
            a0: c.a0.into(),
            a03: c.a03,
            a1: c.a1.into(),
            a13: c.a13,
            tile: c.tile,
        }
    }
}

impl AffineCamera {
    pub fn new(a0: Vec3, a03: f64, a1: Vec3, a13: f64, tile: TileBox) -> Result<Self> {
        let scale = a0.norm() * a1.norm();
        if !(scale > 0.0) || a0.cross(&a1).norm() <= 1e-12 * scale {
            return Err(Error::DegenerateGeometry(
                "affine camera rows A0 and A1 are linearly dependent".into(),
            ));
        }
        let gram = Matrix2::new(a0.dot(&a0), a0.dot(&a1), a0.dot(&a1), a1.dot(&a1));
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::DegenerateGeometry("singular affine Gram matrix".into()))?;
        Ok(AffineCamera {
            a0,
            a03,
            a1,
            a13,
            tile,
            gram_inv,
        })
    }

    /// `(u, v)` = `(sample, line)` of a local enu point.
    pub fn project(&self, x: &Vec3) -> (f64, f64) {
        (self.a0.dot(x) + self.a03, self.a1.dot(x) + self.a13)
    }

    /// Unit ray direction `A₀×A₁`, oriented toward the sensor (non-negative up
    /// component).
    pub fn direction(&self) -> Vec3 {
        let d = self.a0.cross(&self.a1).normalize();
        if d.z < 0.0 {
            -d
        } else {
            d
        }
    }

    /// The point `β₀A₀ + β₁A₁` on the ray through `(u, v)`.
    pub fn ray_point(&self, u: f64, v: f64) -> Vec3 {
        let beta = self.gram_inv * Vector2::new(u - self.a03, v - self.a13);
        self.a0 * beta[0] + self.a1 * beta[1]
    }
}

/// How the in-plane axes and slant range of a ray are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayFrame {
    /// Sensor `X` axis in local enu (rotated into the plane orthogonal to the
    /// ray) and the sensor-to-scene distance.
    Sensor { x_axis: Vec3, slant_range: f64 },
    /// No pose available: deterministic in-plane completion and a slant range
    /// of `altitude / sin(elevation)`.
    Altitude { altitude: f64 },
}

/// A geometric ray with an orthonormal frame `(û, v̂, r̂)`, right-handed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    pub slant_range: f64,
}

impl Ray {
    /// Builds a ray, completing the in-plane axes from `frame`.
    pub fn new(origin: Vec3, direction: Vec3, frame: RayFrame) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateGeometry("ray direction is zero or origin not finite".into()));
        }
        let direction = direction / n;
        let (hint, slant_range) = match frame {
            RayFrame::Sensor { x_axis, slant_range } => (Some(x_axis), slant_range),
            RayFrame::Altitude { altitude } => {
                let elev = direction.z.clamp(-1.0, 1.0).asin();
                if !(elev > 0.0) {
                    return Err(Error::DegenerateGeometry(
                        "ray is not above the horizon; slant range undefined".into(),
                    ));
                }
                (None, altitude / elev.sin())
            }
        };
        if !(slant_range > 0.0 && slant_range.is_finite()) {
            return Err(Error::InvalidInput(format!("slant range must be positive, got {slant_range}")));
        }
        let u_axis = hint
            .map(|h| h - direction * h.dot(&direction))
            .filter(|u| u.norm() > 1e-9)
            .map(|u| u.normalize())
            .unwrap_or_else(|| any_orthogonal(&direction));
        let v_axis = direction.cross(&u_axis);
        Ok(Ray {
            origin,
            direction,
            u_axis,
            v_axis,
            slant_range,
        })
    }

    /// Same ray with its origin moved within the orthogonal plane.
    pub fn displaced(&self, eps_u: f64, eps_v: f64) -> Ray {
        Ray {
            origin: self.origin + self.u_axis * eps_u + self.v_axis * eps_v,
            ..*self
        }
    }

    pub fn point_at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    /// Perpendicular distance from `x` to the ray line.
    pub fn distance_to(&self, x: &Vec3) -> f64 {
        let d = self.origin - x;
        (d - self.direction * d.dot(&self.direction)).norm()
    }

    /// Angle between the two ray lines (radians).
    pub fn angle_to(&self, other: &Ray) -> f64 {
        self.direction.cross(&other.direction).norm().atan2(self.direction.dot(&other.direction).abs())
    }
}

/// Result of an affine regression over a tile.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFit {
    pub camera: AffineCamera,
    /// Root-mean-square reprojection residual over the fit samples (px).
    pub rms_residual: f64,
    pub max_residual: f64,
    pub n_samples: usize,
}

/// Least-squares fit of the eight affine parameters to `(enu point, pixel)`
/// pairs generated by forward-projecting seeded uniform samples of `tile`.
pub fn fit_affine_camera(
    m: &RpcModel,
    tile: &TileBox,
    n_samples: usize,
    frame: &LocalFrame,
    seed: u64,
) -> Result<AffineFit> {
    if n_samples < 8 {
        return Err(Error::InvalidInput(format!("affine fit needs at least 8 samples, got {n_samples}")));
    }
    tile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec3> = (0..n_samples).map(|_| tile.sample(&mut rng)).collect();
    fit_affine_to_points(m, tile, &points, frame)
}

/// As [`fit_affine_camera`] with caller-supplied sample points.
pub fn fit_affine_to_points(m: &RpcModel, tile: &TileBox, points: &[Vec3], frame: &LocalFrame) -> Result<AffineFit> {
    let n = points.len();
    if n < 4 {
        return Err(Error::InvalidInput("affine fit needs at least 4 points".into()));
    }
    let center = tile.center();
    let scale = tile.half_extent().map(|v| if v > 0.0 { v } else { 1.0 });
    let mut design = DMatrix::zeros(n, 4);
    let mut rhs = DMatrix::zeros(n, 2);
    for (i, x) in points.iter().enumerate() {
        let g = frame.enu_to_geodetic(x)?;
        let px = m.project(&g)?;
        let xn = (x - center).component_div(&scale);
        design[(i, 0)] = xn.x;
        design[(i, 1)] = xn.y;
        design[(i, 2)] = xn.z;
        design[(i, 3)] = 1.0;
        rhs[(i, 0)] = px.sample;
        rhs[(i, 1)] = px.line;
    }
    let svd = design.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::FitFailed(format!(
            "rank-deficient design (singular values {smin:e} / {smax:e}); tile is degenerate"
        )));
    }
    // QR is markedly more accurate than the SVD solve for this tall system.
    let qr = design.qr();
    let sol = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &rhs))
        .ok_or_else(|| Error::FitFailed("singular affine design".into()))?;
    // Undo the centering/scaling: u = Σ c_k (x_k − center_k)/scale_k + c_3.
    let mut rows = [(Vec3::zeros(), 0.0); 2];
    for (k, row) in rows.iter_mut().enumerate() {
        let coef = Vec3::new(sol[(0, k)], sol[(1, k)], sol[(2, k)]).component_div(&scale);
        *row = (coef, sol[(3, k)] - coef.dot(&center));
    }
    let camera = AffineCamera::new(rows[0].0, rows[0].1, rows[1].0, rows[1].1, *tile)?;

    let residuals = DVector::from_iterator(
        n,
        points.iter().enumerate().map(|(i, x)| {
            let (u, v) = camera.project(x);
            (u - rhs[(i, 0)]).hypot(v - rhs[(i, 1)])
        }),
    );
    Ok(AffineFit {
        camera,
        rms_residual: (residuals.norm_squared() / n as f64).sqrt(),
        max_residual: residuals.max(),
        n_samples: n,
    })
}

/// The ray through pixel `(u, v)` of an affine camera. Projecting the ray
/// origin through the camera returns `(u, v)`.
pub fn affine_ray(c: &AffineCamera, u: f64, v: f64, frame: RayFrame) -> Result<Ray> {
    Ray::new(c.ray_point(u, v), c.direction(), frame)
}

/// Ray through pixel `(u, v)` = `(sample, line)` from back-projecting onto two
/// heights, expressed in the local enu frame. The origin is the solution at
/// `h0`.
pub fn back_project_two_planes(
    m: &RpcModel,
    u: f64,
    v: f64,
    h0: f64,
    h1: f64,
    frame: &LocalFrame,
    ray_frame: RayFrame,
) -> Result<Ray> {
    if h0 == h1 || !h0.is_finite() || !h1.is_finite() {
        return Err(Error::InvalidInput("back-projection heights must differ".into()));
    }
    let target = ImageCoord { line: v, sample: u };
    let g0 = m.back_project_at_height(target, h0)?;
    let g1 = m.back_project_at_height(target, h1)?;
    let x0 = frame.geodetic_to_enu(&g0);
    let x1 = frame.geodetic_to_enu(&g1);
    let mut d = x1 - x0;
    if d.z < 0.0 {
        d = -d;
    }
    Ray::new(x0, d, ray_frame)
}
