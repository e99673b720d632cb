//! Geopositioning error propagation for multi-view satellite stereo.
//!
//! The crate covers the chain from sensor models to fused elevation grids:
//!
//! - [`geodesy`]: WGS84 conversions and local East-North-Up frames.
//! - [`rpc`]: RPC00B projection, affine camera fitting and ray construction.
//! - [`pose`]: satellite geometry, pose error covariances and their mapping
//!   to ray displacements.
//! - [`intersect`]: weighted multi-ray intersection, classical propagation,
//!   Monte Carlo validation and confidence ellipsoids.
//! - [`local`]: point-cloud binning, consensus fusion, disparity total
//!   variation and evaluation against ground truth.
//! - [`synth`]: deterministic synthetic scenes, cameras and point clouds.
//! - [`io`]: file formats used by the command-line tool.

pub mod error;
pub mod geodesy;
pub mod intersect;
pub mod io;
pub mod linalg;
pub mod local;
pub mod pose;
pub mod rpc;
pub mod synth;

pub use error::{Error, Result};
pub use geodesy::{EcfVector, GeodeticPoint, LocalFrame};
pub use intersect::{
    error_ellipsoid, intersect_unweighted, intersect_weighted, mig_covariance, monte_carlo_scatter, refine_intersection,
    ErrorEllipsoid, IntersectionResult, RayBundle,
};
pub use linalg::{Mat3, Vec3};
pub use pose::{ImagePoseSpec, Platform, PoseCovariance, PoseErrorSpec, RayCovariance, SatelliteState};
pub use rpc::{AffineCamera, ImageCoord, Ray, RayFrame, RpcModel, TileBox};
