//! Local elevation error: DSM fusion from probabilistic stereo clouds,
//! horizontal and vertical variances, disparity total variation, and
//! evaluation against ground truth.

mod evaluate;
mod fusion;
mod grid;
mod tv;

pub use evaluate::{
    h90_grid, h90_radius, neighborhood_normalized_distance, normalized_distance, normalized_value, NdistSummary, CE90_FACTOR,
    EPS_Z, NDIST_90,
};
pub use fusion::{
    bin_elevation, bin_points, canonical_order, consensus_fuse, fuse_dsm, fuse_horizontal, horizontal_variance,
    weighted_mean_std, BinSample, CloudIndex, Consensus, DsmGrid, FusionParams, Neighbor, StereoCloud, WeightedPoint,
};
pub use grid::{GridSpec, LayerKind, Raster};
pub use tv::{tv_class, tv_to_sigma, DisparityGrid, TvCalibration, TvClasses};
