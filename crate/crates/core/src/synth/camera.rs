//! Synthetic pushbroom RPCs built from a pose.
//!
//! The ideal camera is the parallel projection along the line of sight:
//! `sample = sX̂·(x − c)/gsd + u_c` and `line = sŶ·(x − c)/gsd + v_c`, with the
//! sensor axes expressed in enu. An optional cubic distortion is added as a
//! function of the normalized ideal image coordinates only, so it is constant
//! along each ray. The distortion is adjusted per tile so that it does not
//! bias the direction of a least-squares affine fit over the tile. The resulting mapping is fitted with third-order RPC
//! numerators over the tile's geodetic box (denominators are 1).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{GeodeticPoint, LocalFrame};
use crate::linalg::Vec3;
use crate::pose::{ImagePoseSpec, SatelliteState};
use crate::rpc::{rpc_terms, AffineCamera, RpcModel, TileBox, RPC_TERMS};

/// Image margin around the projected tile (px).
const IMAGE_MARGIN: f64 = 10.0;
/// Relative padding of the geodetic normalization box.
const BOX_PAD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushbroomOptions {
    /// Ground sample distance (m/px).
    pub gsd: f64,
    /// Amplitude of the cubic image distortion (px).
    pub perturbation: f64,
    /// Fit samples per normalized axis.
    pub fit_grid: usize,
}

impl Default for PushbroomOptions {
    fn default() -> Self {
        PushbroomOptions {
            gsd: 0.5,
            perturbation: 0.0,
            fit_grid: 7,
        }
    }
}

/// A synthetic RPC with the ideal affine camera it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCamera {
    pub rpc: RpcModel,
    /// Undistorted parallel projection in the enu frame at the pose origin.
    pub ideal: AffineCamera,
    /// RMS error of the polynomial fit over its sample grid (px).
    pub fit_rms: f64,
}

/// Cubic distortion of normalized image coordinates `(ũ, ṽ)`, in units of the
/// amplitude. Coefficients multiply `[ũ³, ũ²ṽ, ũṽ², ṽ³]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicDistortion {
    pub u: [f64; 4],
    pub v: [f64; 4],
}

impl CubicDistortion {
    /// Base pattern before any tile adjustment.
    pub const BASE: CubicDistortion = CubicDistortion {
        u: [2.0, 1.5, 0.5, 2.0],
        v: [-2.0, 0.5, 1.5, 2.0],
    };

    pub fn eval(&self, u: f64, v: f64) -> (f64, f64) {
        let m = monomials(u, v);
        (dot4(&self.u, &m), dot4(&self.v, &m))
    }

    /// Removes the part of each component that would tilt the least-squares
    /// affine ray direction over a uniformly sampled tile.
    ///
    /// `gu` and `gv` map tile coordinates `s ∈ [-1, 1]³` to `(ũ, ṽ)`; `w` is the
    /// ray direction expressed as a linear form on `s`. Moments are exact under
    /// three-point Gauss-Legendre quadrature.
    pub fn untilted(&self, gu: &Vec3, gv: &Vec3, w: &Vec3) -> CubicDistortion {
        let mut t = [0.0; 4];
        for (s, weight) in gauss_legendre_box() {
            let m = monomials(gu.dot(&s), gv.dot(&s));
            let ws = w.dot(&s) * weight;
            for j in 0..4 {
                t[j] += ws * m[j];
            }
        }
        let norm = dot4(&t, &t);
        if norm <= f64::MIN_POSITIVE {
            return *self;
        }
        let fix = |c: &[f64; 4]| -> [f64; 4] {
            let k = dot4(c, &t) / norm;
            std::array::from_fn(|j| c[j] - k * t[j])
        };
        CubicDistortion {
            u: fix(&self.u),
            v: fix(&self.v),
        }
    }
}

fn monomials(u: f64, v: f64) -> [f64; 4] {
    [u * u * u, u * u * v, u * v * v, v * v * v]
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Three-point Gauss-Legendre nodes and weights on `[-1, 1]³` (weights sum to 1).
fn gauss_legendre_box() -> impl Iterator<Item = (Vec3, f64)> {
    let r = (0.6f64).sqrt();
    let nodes = [(-r, 5.0 / 18.0), (0.0, 8.0 / 18.0), (r, 5.0 / 18.0)];
    (0..27).map(move |k| {
        let (a, b, c) = (nodes[k % 3], nodes[(k / 3) % 3], nodes[k / 9]);
        (Vec3::new(a.0, b.0, c.0), a.1 * b.1 * c.1)
    })
}

/// Builds an RPC for `pose` valid over `tile` (enu at the pose origin).
pub fn make_pushbroom_rpc(pose: &ImagePoseSpec, tile: &TileBox, opts: &PushbroomOptions) -> Result<SyntheticCamera> {
    if !(opts.gsd > 0.0) || !opts.perturbation.is_finite() || opts.fit_grid < 4 {
        return Err(Error::InvalidInput(format!("invalid pushbroom options {opts:?}")));
    }
    let state = SatelliteState::from_pose(pose)?;
    let frame = LocalFrame::new(pose.origin);
    let m = state.enu_to_sensor.matrix();
    let (xs, ys) = (m.row(0).transpose(), m.row(1).transpose());
    let center = tile.center();
    let half = tile.half_extent();

    let corners: Vec<Vec3> = (0..8)
        .map(|k| center + Vec3::new(sign(k & 1), sign(k & 2), sign(k & 4)).component_mul(&half))
        .collect();
    let hu = corners.iter().map(|c| xs.dot(&(c - center)).abs()).fold(0.0, f64::max) / opts.gsd;
    let hv = corners.iter().map(|c| ys.dot(&(c - center)).abs()).fold(0.0, f64::max) / opts.gsd;
    if !(hu > 0.0 && hv > 0.0) {
        return Err(Error::InvalidInput("tile projects to a degenerate image region".into()));
    }
    let (uc, vc) = (hu + IMAGE_MARGIN, hv + IMAGE_MARGIN);
    let a0 = xs / opts.gsd;
    let a1 = ys / opts.gsd;
    let ideal = AffineCamera::new(a0, uc - a0.dot(&center), a1, vc - a1.dot(&center), *tile)?;

    let gu = (a0 / hu).component_mul(&half);
    let gv = (a1 / hv).component_mul(&half);
    let w = ideal.direction().component_div(&half);
    let distortion = CubicDistortion::BASE.untilted(&gu, &gv, &w);
    let image = |x: &Vec3| -> (f64, f64) {
        let (u, v) = ideal.project(x);
        let (du, dv) = distortion.eval((u - uc) / hu, (v - vc) / hv);
        (u + opts.perturbation * du, v + opts.perturbation * dv)
    };

    // Geodetic normalization box from a lattice over the tile.
    let n_box = 5;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in lattice(n_box) {
        let g = frame.enu_to_geodetic(&(center + p.component_mul(&half)))?;
        for (k, v) in [g.lon_deg(), g.lat_deg(), g.h].into_iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let off: Vec<f64> = (0..3).map(|k| 0.5 * (lo[k] + hi[k])).collect();
    let scale: Vec<f64> = (0..3)
        .map(|k| (0.5 * (hi[k] - lo[k]) * (1.0 + BOX_PAD)).max(1e-9))
        .collect();

    // Least-squares cubic fit in normalized coordinates.
    let samples: Vec<Vec3> = lattice(opts.fit_grid).collect();
    let n = samples.len();
    let mut design = DMatrix::zeros(n, RPC_TERMS);
    let mut rhs = DMatrix::zeros(n, 2);
    for (i, s) in samples.iter().enumerate() {
        let g = GeodeticPoint::from_degrees(s.x * scale[0] + off[0], s.y * scale[1] + off[1], s.z * scale[2] + off[2])?;
        let (u, v) = image(&frame.geodetic_to_enu(&g));
        design.row_mut(i).copy_from_slice(&rpc_terms(s.x, s.y, s.z));
        rhs[(i, 0)] = (v - vc) / hv;
        rhs[(i, 1)] = (u - uc) / hu;
    }
    let qr = design.clone().qr();
    let sol = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &rhs))
        .ok_or_else(|| Error::FitFailed("singular RPC design matrix".into()))?;
    let resid = &design * &sol - &rhs;
    let px: DVector<f64> = DVector::from_fn(n, |i, _| (resid[(i, 0)] * hv).hypot(resid[(i, 1)] * hu));
    let mut den = [0.0; RPC_TERMS];
    den[0] = 1.0;
    let column = |k: usize| -> [f64; RPC_TERMS] { std::array::from_fn(|t| sol[(t, k)]) };
    let rpc = RpcModel {
        line_off: vc,
        samp_off: uc,
        lat_off: off[1],
        long_off: off[0],
        height_off: off[2],
        line_scale: hv,
        samp_scale: hu,
        lat_scale: scale[1],
        long_scale: scale[0],
        height_scale: scale[2],
        line_num_coeff: column(0),
        line_den_coeff: den,
        samp_num_coeff: column(1),
        samp_den_coeff: den,
    };
    rpc.validate()?;
    Ok(SyntheticCamera {
        rpc,
        ideal,
        fit_rms: (px.norm_squared() / n as f64).sqrt(),
    })
}

fn sign(bit: usize) -> f64 {
    if bit == 0 {
        -1.0
    } else {
        1.0
    }
}

/// `n³` points evenly spaced over `[-1, 1]³`.
fn lattice(n: usize) -> impl Iterator<Item = Vec3> {
    let t = move |i: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    (0..n * n * n).map(move |k| Vec3::new(t(k % n), t((k / n) % n), t(k / (n * n))))
}
