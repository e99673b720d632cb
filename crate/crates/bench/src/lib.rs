//! Shared fixtures for the benchmarks.

use geoerr_core::local::{GridSpec, StereoCloud};
use geoerr_core::synth::{make_ray_bundle, make_stereo_clouds, random_scene, CloudOptions, SceneRays, Surface};

/// Ray bundle of a random scene with `n` images.
pub fn scene_rays(n: usize) -> SceneRays {
    make_ray_bundle(&random_scene(n, 1).expect("random scene")).expect("ray bundle")
}

/// Noisy clouds over a gable roof on a `size × size` grid at 0.5 m.
pub fn gable_clouds(size: usize, n_pairs: usize) -> (GridSpec, Vec<StereoCloud>) {
    let spec = GridSpec::new([0.0, 0.0], 0.5, size, size).expect("grid");
    let half = size as f64 * 0.25;
    let surface = Surface::Gable { ridge: half, half_width: half * 0.5, eave: 8.0, top: 12.0, base: 2.0 };
    let mut opts = CloudOptions::noiseless(n_pairs, &spec, 5);
    opts.sigma_z = 0.3;
    opts.sigma_xy = 0.1;
    opts.outlier_rate = 0.05;
    (spec, make_stereo_clouds(&surface, &spec, &opts).expect("clouds"))
}
