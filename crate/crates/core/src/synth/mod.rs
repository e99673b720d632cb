//! Deterministic synthetic inputs with retained ground truth: pushbroom
//! RPCs, scenes with ray bundles through a known point, site templates and
//! stereo point clouds.

mod camera;
mod clouds;
mod scene;
mod sites;

pub use camera::{CubicDistortion, make_pushbroom_rpc, PushbroomOptions, SyntheticCamera};
pub use clouds::{make_stereo_clouds, CloudOptions};
pub use scene::{
    make_ray_bundle, ErrorConfig, ImageConfig, SceneConfig, SceneRays, Surface, DEFAULT_ALTITUDE, DEFAULT_INCLINATION_DEG,
    RAY_ORIGIN_OFFSET,
};
pub use sites::{random_scene, site_scene, three_pass_scene, Site};
