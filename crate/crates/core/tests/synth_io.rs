use geoerr_core::intersect::intersect_unweighted;
use geoerr_core::io::{read_cloud, read_json, read_raster, write_cloud, write_json, write_raster, DEFAULT_CLOUD_FRAME};
use geoerr_core::linalg::Vec3;
use geoerr_core::local::{fuse_dsm, FusionParams, GridSpec, LayerKind};
use geoerr_core::rpc::{back_project_two_planes, fit_affine_camera, RayFrame, TileBox};
use geoerr_core::synth::{
    make_pushbroom_rpc, make_ray_bundle, make_stereo_clouds, site_scene, CloudOptions, PushbroomOptions, SceneConfig, Site,
    Surface,
};
use geoerr_core::LocalFrame;

#[test]
fn site_bundles_pass_through_truth() {
    for site in Site::ALL {
        let scene = site_scene(site);
        assert_eq!(scene.images.len(), site.n_images());
        let sr = make_ray_bundle(&scene).unwrap();
        let x = intersect_unweighted(&sr.bundle).unwrap();
        assert!((x - sr.truth).norm() < 1e-9, "{}", site.name());
    }
}

#[test]
fn scene_config_survives_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.json");
    let scene = site_scene(Site::WrightPatterson);
    write_json(&path, &scene).unwrap();
    let back: SceneConfig = read_json(&path, "scene").unwrap();
    assert_eq!(back, scene);
    let text = std::fs::read_to_string(&path).unwrap();
    for key in ["azimuth_deg", "elevation_deg", "altitude_m", "inclination_deg", "pass_id", "rho"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn generated_clouds_and_rasters_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec::new([0.0, 0.0], 1.0, 16, 12).unwrap();
    let surface = Surface::Step { edge: 8.0, low: 1.0, high: 3.0 };
    let clouds = make_stereo_clouds(&surface, &spec, &CloudOptions::noiseless(3, &spec, 4)).unwrap();
    for c in &clouds {
        let path = dir.path().join(format!("{}.bin", c.pair_id));
        write_cloud(&path, c, DEFAULT_CLOUD_FRAME, None).unwrap();
        assert_eq!(&read_cloud(&path).unwrap().0, c);
    }
    let dsm = fuse_dsm(&clouds, &spec, &FusionParams::for_spacing(1.0)).unwrap();
    let z = dsm.layer(LayerKind::Z).unwrap();
    let path = dir.path().join("z.f32");
    write_raster(&path, &z, LayerKind::Z, None).unwrap();
    let (back, _) = read_raster(&path).unwrap();
    for (a, b) in back.data.iter().zip(&z.data) {
        assert!((a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-6 * b.abs().max(1.0));
    }
}

#[test]
fn exact_affine_rpc_reproduces_two_plane_rays() {
    let scene = site_scene(Site::BuenosAires);
    let pose = scene.images[0].to_pose(scene.origin).unwrap();
    let tile = TileBox::centered(Vec3::zeros(), Vec3::new(250.0, 250.0, 50.0));
    let frame = LocalFrame::new(scene.origin);
    let cam = make_pushbroom_rpc(&pose, &tile, &PushbroomOptions::default()).unwrap();
    let fit = fit_affine_camera(&cam.rpc, &tile, 8, &frame, 9).unwrap();
    assert!(fit.rms_residual < 1e-8);
    let (u, v) = fit.camera.project(&Vec3::new(100.0, -80.0, 10.0));
    let r = back_project_two_planes(&cam.rpc, u, v, -40.0, 40.0, &frame, RayFrame::Altitude { altitude: 620e3 }).unwrap();
    let d = fit.camera.direction();
    assert!(d.cross(&r.direction).norm() < 1e-9);
}
