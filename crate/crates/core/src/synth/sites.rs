//! Scene templates mirroring the view distributions of four published
//! sites, plus randomized scenes for testing.
//!
//! Image counts, pass groupings and platform mixes follow the published
//! descriptions. Individual view angles are not tabulated there, so they are
//! drawn deterministically from a fixed per-site seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{ImageConfig, SceneConfig, DEFAULT_ALTITUDE, DEFAULT_INCLINATION_DEG};
use crate::error::Result;
use crate::geodesy::GeodeticPoint;
use crate::pose::{Platform, DEFAULT_RHO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    BuenosAires,
    WrightPatterson,
    Richmond,
    Kandahar,
}

impl Site {
    pub const ALL: [Site; 4] = [Site::BuenosAires, Site::WrightPatterson, Site::Richmond, Site::Kandahar];

    pub fn name(self) -> &'static str {
        match self {
            Site::BuenosAires => "buenos_aires",
            Site::WrightPatterson => "wright_patterson",
            Site::Richmond => "richmond",
            Site::Kandahar => "kandahar",
        }
    }

    /// `(lon°, lat°, h m)` of the local origin.
    fn origin(self) -> (f64, f64, f64) {
        match self {
            Site::BuenosAires => (-58.5859220, -34.4894120, 20.0),
            Site::WrightPatterson => (-84.05, 39.78, 250.0),
            Site::Richmond => (-77.43, 37.54, 50.0),
            Site::Kandahar => (65.71, 31.61, 1010.0),
        }
    }

    /// Platform population, listed with the multi-image passes' platform first.
    fn platforms(self) -> Vec<(Platform, usize)> {
        match self {
            Site::BuenosAires => vec![(Platform::WorldView3, 29)],
            Site::WrightPatterson => vec![(Platform::WorldView3, 19)],
            Site::Richmond => vec![
                (Platform::GeoEye1, 12),
                (Platform::QuickBird, 3),
                (Platform::WorldView1, 1),
                (Platform::WorldView2, 23),
                (Platform::WorldView3, 5),
            ],
            Site::Kandahar => vec![(Platform::WorldView2, 13), (Platform::QuickBird, 2), (Platform::WorldView1, 6)],
        }
    }

    /// Sizes of the multi-image passes; every other image is its own pass.
    fn passes(self) -> &'static [usize] {
        match self {
            Site::BuenosAires => &[4],
            Site::WrightPatterson => &[6, 5, 4],
            Site::Richmond => &[],
            Site::Kandahar => &[2],
        }
    }

    pub fn n_images(self) -> usize {
        self.platforms().iter().map(|(_, n)| n).sum()
    }

    fn seed(self) -> u64 {
        0x5173_0000 + self as u64
    }
}

fn origin_point((lon, lat, h): (f64, f64, f64)) -> GeodeticPoint {
    GeodeticPoint::from_degrees(lon, lat, h).expect("template origins are valid")
}

fn image(id: String, pass_id: String, platform: Platform, az: f64, el: f64) -> ImageConfig {
    ImageConfig {
        id,
        pass_id,
        platform: Some(platform),
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

/// Views of one pass: the satellite sweeps in azimuth across an elevation arc.
fn pass_views<R: Rng>(rng: &mut R, n: usize) -> Vec<(f64, f64)> {
    let az0 = rng.random_range(0.0..360.0);
    let el0 = rng.random_range(60.0..78.0);
    let sweep = rng.random_range(25.0..50.0);
    (0..n)
        .map(|k| {
            let t = if n > 1 { k as f64 / (n - 1) as f64 - 0.5 } else { 0.0 };
            let az = (az0 + sweep * t).rem_euclid(360.0);
            let el = el0 - 18.0 * t.abs();
            (az, el)
        })
        .collect()
}

fn build_scene(origin: GeodeticPoint, platforms: &[(Platform, usize)], passes: &[usize], seed: u64) -> SceneConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<Platform> = platforms.iter().flat_map(|&(p, n)| std::iter::repeat_n(p, n)).collect();
    let mut images = Vec::with_capacity(pool.len());
    let mut pass_no = 0;
    // Multi-image passes take their platform from the front of the pool.
    for &size in passes {
        let platform = pool[0];
        let views = pass_views(&mut rng, size);
        for (az, el) in views {
            let at = pool.iter().position(|&p| p == platform).expect("pass platform available");
            pool.remove(at);
            images.push(image(format!("img_{:02}", images.len()), format!("pass_{pass_no:02}"), platform, az, el));
        }
        pass_no += 1;
    }
    pool.shuffle(&mut rng);
    for platform in pool {
        let az = rng.random_range(0.0..360.0);
        let el = rng.random_range(50.0..85.0);
        images.push(image(format!("img_{:02}", images.len()), format!("pass_{pass_no:02}"), platform, az, el));
        pass_no += 1;
    }
    SceneConfig {
        origin,
        truth_enu: [0.0, 0.0, 0.0],
        images,
        surface: None,
    }
}

/// Scene template for one of the published sites.
pub fn site_scene(site: Site) -> SceneConfig {
    build_scene(origin_point(site.origin()), &site.platforms(), site.passes(), site.seed())
}

/// Seventeen WorldView3 images in three passes (6, 6, 5) with `ρ = 0.8`.
pub fn three_pass_scene(seed: u64) -> SceneConfig {
    build_scene(
        origin_point(Site::BuenosAires.origin()),
        &[(Platform::WorldView3, 17)],
        &[6, 6, 5],
        seed,
    )
}

/// `n ≥ 2` images with a random platform mix and random multi-image passes.
pub fn random_scene(n: usize, seed: u64) -> Result<SceneConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passes = Vec::new();
    let mut left = n;
    while left >= 2 && rng.random_bool(0.6) {
        let size = rng.random_range(2..=left.min(6));
        passes.push(size);
        left -= size;
    }
    // Each pass is single-platform: draw its platform, then the singletons.
    let mut platforms = Vec::new();
    for &size in &passes {
        platforms.push((Platform::ALL[rng.random_range(0..Platform::ALL.len())], size));
    }
    for _ in 0..left {
        platforms.push((Platform::ALL[rng.random_range(0..Platform::ALL.len())], 1));
    }
    let lon = rng.random_range(-170.0..170.0);
    let lat = rng.random_range(-60.0..60.0);
    let origin = GeodeticPoint::from_degrees(lon, lat, rng.random_range(0.0..500.0))?;
    // `build_scene` takes passes in pool order, so list pass platforms first.
    let scene = build_scene_ordered(origin, &platforms, &passes, rng.random());
    scene.validate()?;
    Ok(scene)
}

fn build_scene_ordered(origin: GeodeticPoint, groups: &[(Platform, usize)], passes: &[usize], seed: u64) -> SceneConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::new();
    for (pass_no, &(platform, size)) in groups.iter().enumerate() {
        let views = if pass_no < passes.len() {
            pass_views(&mut rng, size)
        } else {
            vec![(rng.random_range(0.0..360.0), rng.random_range(50.0..85.0))]
        };
        for (az, el) in views {
            images.push(image(format!("img_{:02}", images.len()), format!("pass_{pass_no:02}"), platform, az, el));
        }
    }
    SceneConfig {
        origin,
        truth_enu: [0.0, 0.0, 0.0],
        images,
        surface: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::make_ray_bundle;
    use std::collections::HashMap;

    fn pass_sizes(s: &SceneConfig) -> Vec<usize> {
        let mut count: HashMap<&str, usize> = HashMap::new();
        for im in &s.images {
            *count.entry(&im.pass_id).or_default() += 1;
        }
        let mut sizes: Vec<usize> = count.into_values().filter(|&n| n > 1).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    #[test]
    fn templates_match_published_counts() {
        let expect = [(Site::BuenosAires, 29, vec![4]), (Site::WrightPatterson, 19, vec![6, 5, 4]), (Site::Richmond, 44, vec![]), (Site::Kandahar, 21, vec![2])];
        for (site, n, passes) in expect {
            let s = site_scene(site);
            assert_eq!(s.images.len(), n, "{site:?}");
            assert_eq!(pass_sizes(&s), passes, "{site:?}");
            let r = make_ray_bundle(&s).unwrap();
            assert_eq!(r.bundle.len(), n);
        }
        let richmond = site_scene(Site::Richmond);
        let gey = richmond.images.iter().filter(|i| i.platform == Some(Platform::GeoEye1)).count();
        assert_eq!(gey, 12);
    }

    #[test]
    fn templates_are_deterministic() {
        assert_eq!(site_scene(Site::Kandahar), site_scene(Site::Kandahar));
        assert_eq!(three_pass_scene(3), three_pass_scene(3));
        assert_eq!(pass_sizes(&three_pass_scene(3)), vec![6, 6, 5]);
    }

    #[test]
    fn random_scenes_are_valid() {
        for seed in 0..20 {
            let n = 3 + seed as usize * 2;
            let s = random_scene(n, seed).unwrap();
            assert_eq!(s.images.len(), n);
            make_ray_bundle(&s).unwrap();
        }
    }
}
