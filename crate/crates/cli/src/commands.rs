//! Subcommand configs and drivers.
//!
//! Each subcommand reads an optional JSON config, applies command-line
//! overrides and writes its artifacts into the output directory. The
//! effective config (without the thread count and output directory) is
//! hashed into every artifact's provenance.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use geoerr_core::intersect::{
    intersect_unweighted_result, mig_covariance, mig_inputs, monte_carlo_scatter, unweighted_estimator_covariance,
    MonteCarloOptions, MonteCarloScene,
};
use geoerr_core::io::{
    read_cloud, read_cloud_csv, read_raster, write_ascii_grid, write_cloud, write_raster, IntersectionReport,
    DEFAULT_CLOUD_FRAME,
};
use geoerr_core::linalg::{mat3_row_major, mat3_to_dmatrix, rel_frobenius, Mat3, Vec3};
use geoerr_core::local::{
    fuse_dsm, h90_grid, neighborhood_normalized_distance, normalized_distance, tv_class, tv_to_sigma, DisparityGrid,
    DsmGrid, FusionParams, GridSpec, LayerKind, NdistSummary, Raster, StereoCloud, TvCalibration,
};
use geoerr_core::rpc::{fit_affine_camera, RpcModel, TileBox, DEFAULT_FIT_SAMPLES};
use geoerr_core::synth::{
    make_pushbroom_rpc, make_ray_bundle, make_stereo_clouds, random_scene, site_scene, three_pass_scene, CloudOptions,
    PushbroomOptions, SceneConfig, Site, Surface,
};
use geoerr_core::{error_ellipsoid, intersect_weighted, GeodeticPoint, LocalFrame};
use serde::{Deserialize, Serialize};

use crate::run::{load_config, read_input, require, CliError, CliResult, Outputs};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Random seed recorded in every output.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores). Does not affect results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

fn default_tile() -> TileBox {
    TileBox::centered(Vec3::zeros(), Vec3::new(250.0, 250.0, 50.0))
}

fn row_major(m: &Mat3) -> [f64; 9] {
    mat3_row_major(m)
}

// ---------------------------------------------------------------- fit-affine

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitAffineConfig {
    pub rpc: Option<PathBuf>,
    /// Origin of the local enu frame; defaults to the RPC ground offsets.
    pub origin: Option<GeodeticPoint>,
    pub tile: TileBox,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for FitAffineConfig {
    fn default() -> Self {
        FitAffineConfig {
            rpc: None,
            origin: None,
            tile: default_tile(),
            n_samples: DEFAULT_FIT_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitAffineArgs {
    /// RPC JSON document.
    #[arg(long)]
    pub rpc: Option<PathBuf>,
    /// Number of random tile correspondences.
    #[arg(long)]
    pub n_samples: Option<usize>,
}

#[derive(Serialize)]
struct AffineOutput<'a> {
    camera: &'a geoerr_core::AffineCamera,
    direction: [f64; 3],
    rms_residual: f64,
    max_residual: f64,
    n_samples: usize,
    origin: GeodeticPoint,
    seed: u64,
}

pub fn fit_affine(common: &Common, args: &FitAffineArgs) -> CliResult<()> {
    let mut cfg: FitAffineConfig = load_config(common.config.as_deref())?;
    override_opt(&mut cfg.rpc, &args.rpc);
    override_val(&mut cfg.n_samples, args.n_samples);
    override_val(&mut cfg.seed, common.seed);
    let rpc: RpcModel = read_input(require(&cfg.rpc, "rpc path")?, "rpc")?;
    let origin = match cfg.origin {
        Some(o) => o,
        None => GeodeticPoint::from_degrees(rpc.long_off, rpc.lat_off, rpc.height_off)?,
    };
    let fit = fit_affine_camera(&rpc, &cfg.tile, cfg.n_samples, &LocalFrame::new(origin), cfg.seed)?;
    let out = Outputs::new(&common.out, &cfg, cfg.seed)?;
    out.json(
        "affine.json",
        &AffineOutput {
            camera: &fit.camera,
            direction: fit.camera.direction().into(),
            rms_residual: fit.rms_residual,
            max_residual: fit.max_residual,
            n_samples: fit.n_samples,
            origin,
            seed: cfg.seed,
        },
    )?;
    println!("affine fit: rms {:.3e} px, max {:.3e} px", fit.rms_residual, fit.max_residual);
    Ok(())
}

// ------------------------------------------------------------------ intersect

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntersectConfig {
    pub scene: Option<PathBuf>,
    pub weighted: bool,
    pub mig: bool,
    pub confidence: f64,
    /// Overrides the same-pass correlation of every image.
    pub rho: Option<f64>,
    /// Image scale used to express MIG partials in pixels.
    pub pixels_per_meter: f64,
    pub seed: u64,
}

impl Default for IntersectConfig {
    fn default() -> Self {
        IntersectConfig {
            scene: None,
            weighted: true,
            mig: false,
            confidence: 0.9,
            rho: None,
            pixels_per_meter: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct IntersectArgs {
    /// Scene configuration JSON.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Ignore the ray covariance (classical ray intersection).
    #[arg(long)]
    pub no_weights: bool,
    /// Also compute the covariance by classical multi-image propagation.
    #[arg(long)]
    pub mig: bool,
    /// Confidence level of the error ellipsoid.
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Same-pass correlation applied to every image.
    #[arg(long)]
    pub rho: Option<f64>,
}

fn load_scene(path: &Option<PathBuf>, rho: Option<f64>) -> CliResult<SceneConfig> {
    let mut scene: SceneConfig = read_input(require(path, "scene path")?, "scene")?;
    if let Some(r) = rho {
        for img in &mut scene.images {
            img.rho = r;
        }
    }
    scene.validate()?;
    Ok(scene)
}

#[derive(Serialize)]
struct IntersectOutput {
    estimator: &'static str,
    #[serde(flatten)]
    report: IntersectionReport,
    weighted_residual: f64,
    truth_enu: [f64; 3],
}

#[derive(Serialize)]
struct MigOutput {
    #[serde(rename = "P_mig")]
    p_mig: [f64; 9],
    #[serde(rename = "P")]
    p: [f64; 9],
    rel_frobenius: f64,
    seed: u64,
}

pub fn intersect(common: &Common, args: &IntersectArgs) -> CliResult<()> {
    let mut cfg: IntersectConfig = load_config(common.config.as_deref())?;
    override_opt(&mut cfg.scene, &args.scene);
    if args.no_weights {
        cfg.weighted = false;
    }
    cfg.mig |= args.mig;
    override_val(&mut cfg.confidence, args.confidence);
    if args.rho.is_some() {
        cfg.rho = args.rho;
    }
    override_val(&mut cfg.seed, common.seed);
    let scene = load_scene(&cfg.scene, cfg.rho)?;
    let sr = make_ray_bundle(&scene)?;
    let (result, estimator) = if cfg.weighted {
        (intersect_weighted(&sr.bundle)?, "weighted")
    } else {
        (intersect_unweighted_result(&sr.bundle)?, "unweighted")
    };
    for w in sr.warnings.iter().chain(&result.warnings) {
        log::warn!("{w}");
    }
    let ellipsoid = error_ellipsoid(result.point, &result.covariance, cfg.confidence)?;
    let mut report = IntersectionReport::new(&result, &result.covariance, &ellipsoid);
    report.seed = Some(cfg.seed);
    let out = Outputs::new(&common.out, &cfg, cfg.seed)?;
    out.json(
        "intersection.json",
        &IntersectOutput {
            estimator,
            report,
            weighted_residual: result.weighted_residual,
            truth_enu: sr.truth.into(),
        },
    )?;
    if cfg.mig {
        let p = intersect_weighted(&sr.bundle)?.covariance;
        let m = mig_inputs(&sr.bundle, &sr.states, sr.pose_with_kappa.clone(), cfg.pixels_per_meter)?;
        let p_mig = mig_covariance(&m.b, &m.b_p, &m.sigma_p)?;
        let rel = rel_frobenius(&mat3_to_dmatrix(&p_mig), &mat3_to_dmatrix(&p));
        out.json(
            "mig.json",
            &MigOutput {
                p_mig: row_major(&p_mig),
                p: row_major(&p),
                rel_frobenius: rel,
                seed: cfg.seed,
            },
        )?;
        println!("MIG vs weighted covariance: relative Frobenius difference {rel:.3e}");
    }
    println!(
        "{estimator} intersection: X = ({:.4}, {:.4}, {:.4}) m, ellipsoid semi-axes ({:.4}, {:.4}, {:.4}) m at {}",
        result.point.x,
        result.point.y,
        result.point.z,
        ellipsoid.semi_axes[0],
        ellipsoid.semi_axes[1],
        ellipsoid.semi_axes[2],
        cfg.confidence
    );
    Ok(())
}

// ----------------------------------------------------------------- montecarlo

/// Sample count used by the published validation.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub scene: Option<PathBuf>,
    pub n_samples: usize,
    pub weighted: bool,
    pub rho: Option<f64>,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            scene: None,
            n_samples: DEFAULT_MC_SAMPLES,
            weighted: false,
            rho: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    /// Scene configuration JSON.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Number of pose samples.
    #[arg(long, short = 'n')]
    pub n_samples: Option<usize>,
    /// Intersect each sample with the weighted solver.
    #[arg(long)]
    pub weighted: bool,
    /// Same-pass correlation applied to every image.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Serialize)]
struct MonteCarloOutput {
    mean: [f64; 3],
    #[serde(rename = "S_samp")]
    s_samp: [f64; 9],
    #[serde(rename = "P_analytic")]
    p_analytic: [f64; 9],
    rel_frobenius: f64,
    det_weighted: f64,
    det_unweighted: f64,
    seed: u64,
    n_samples: usize,
    weighted: bool,
    rng: &'static str,
}

pub fn montecarlo(common: &Common, args: &MonteCarloArgs) -> CliResult<()> {
    let mut cfg: MonteCarloConfig = load_config(common.config.as_deref())?;
    override_opt(&mut cfg.scene, &args.scene);
    override_val(&mut cfg.n_samples, args.n_samples);
    cfg.weighted |= args.weighted;
    if args.rho.is_some() {
        cfg.rho = args.rho;
    }
    override_val(&mut cfg.seed, common.seed);
    let scene = load_scene(&cfg.scene, cfg.rho)?;
    let sr = make_ray_bundle(&scene)?;
    let mc_scene = MonteCarloScene::new(sr.bundle.rays().to_vec(), sr.jacobian.clone(), sr.pose.clone())?;
    let mc = monte_carlo_scatter(&mc_scene, cfg.n_samples, cfg.seed, MonteCarloOptions { weighted: cfg.weighted })?;
    let p_weighted = intersect_weighted(&mc_scene.bundle)?.covariance;
    let p_unweighted = unweighted_estimator_covariance(&mc_scene.bundle)?;
    let analytic = if cfg.weighted { p_weighted } else { p_unweighted };
    let rel = rel_frobenius(&mat3_to_dmatrix(&mc.sample_covariance), &mat3_to_dmatrix(&analytic));

    let out = Outputs::new(&common.out, &cfg, cfg.seed)?;
    let mut body = String::with_capacity(mc.points.len() * 64);
    for (i, p) in mc.points.iter().enumerate() {
        let _ = writeln!(body, "{i},{},{},{}", p.x, p.y, p.z);
    }
    out.csv("scatter.csv", "sample,x,y,z", &body)?;
    out.json(
        "montecarlo.json",
        &MonteCarloOutput {
            mean: mc.mean.into(),
            s_samp: row_major(&mc.sample_covariance),
            p_analytic: row_major(&analytic),
            rel_frobenius: rel,
            det_weighted: p_weighted.determinant(),
            det_unweighted: p_unweighted.determinant(),
            seed: cfg.seed,
            n_samples: cfg.n_samples,
            weighted: cfg.weighted,
            rng: mc.rng,
        },
    )?;
    println!(
        "{} samples ({}): sample vs analytic covariance relative Frobenius difference {rel:.4}",
        cfg.n_samples,
        if cfg.weighted { "weighted" } else { "unweighted" }
    );
    Ok(())
}

// ----------------------------------------------------------------------- fuse

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseConfig {
    /// Cloud files: `.bin` with a JSON header beside it, or `.csv`.
    pub clouds: Vec<PathBuf>,
    pub grid: Option<GridSpec>,
    /// Binning radius; defaults to the grid spacing.
    pub radius: Option<f64>,
    pub k_max: usize,
    pub tol: f64,
    pub min_pairs: usize,
    pub median: bool,
    pub seed: u64,
}

impl Default for FuseConfig {
    fn default() -> Self {
        FuseConfig {
            clouds: Vec::new(),
            grid: None,
            radius: None,
            k_max: FusionParams::DEFAULT_K_MAX,
            tol: FusionParams::DEFAULT_TOL,
            min_pairs: FusionParams::DEFAULT_MIN_PAIRS,
            median: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FuseArgs {
    /// Cloud files (replaces the config list when given).
    #[arg(long, num_args = 1..)]
    pub clouds: Vec<PathBuf>,
    /// Binning radius (m).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Maximum points per bin.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Consensus tolerance (m).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write a median-fused elevation layer for comparison.
    #[arg(long)]
    pub median: bool,
}

fn read_any_cloud(path: &Path) -> CliResult<StereoCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(read_cloud_csv(path)?),
        _ => Ok(read_cloud(path)?.0),
    }
}

#[derive(Serialize)]
struct FuseOutput {
    grid: GridSpec,
    params: FusionParams,
    clouds: usize,
    valid_cells: usize,
    low_confidence_cells: usize,
    layers: Vec<&'static str>,
    seed: u64,
}

pub fn fuse(common: &Common, args: &FuseArgs) -> CliResult<()> {
    let mut cfg: FuseConfig = load_config(common.config.as_deref())?;
    if !args.clouds.is_empty() {
        cfg.clouds = args.clouds.clone();
    }
    if args.radius.is_some() {
        cfg.radius = args.radius;
    }
    override_val(&mut cfg.k_max, args.k_max);
    override_val(&mut cfg.tol, args.tol);
    cfg.median |= args.median;
    override_val(&mut cfg.seed, common.seed);
    let spec = cfg
        .grid
        .ok_or_else(|| CliError::Config("missing grid: set {origin, spacing, width, height} in the config".into()))?;
    if cfg.clouds.is_empty() {
        return Err(CliError::Config("no cloud files given".into()));
    }
    let clouds = cfg.clouds.iter().map(|p| read_any_cloud(p)).collect::<CliResult<Vec<_>>>()?;
    let params = FusionParams {
        radius: cfg.radius.unwrap_or(spec.spacing),
        k_max: cfg.k_max,
        tol: cfg.tol,
        min_pairs: cfg.min_pairs,
        median: cfg.median,
    };
    let dsm = fuse_dsm(&clouds, &spec, &params)?;
    let out = Outputs::new(&common.out, &cfg, cfg.seed)?;
    let mut kinds = vec![LayerKind::Z, LayerKind::SigmaZ, LayerKind::SigmaH, LayerKind::Pbar, LayerKind::Count];
    if cfg.median {
        kinds.push(LayerKind::ZMedian);
    }
    for kind in &kinds {
        let raster = dsm.layer(*kind).expect("fused layer");
        write_raster(&out.path(&format!("{}.f32", kind.name())), &raster, *kind, Some(&out.provenance))?;
    }
    write_ascii_grid(&out.path("z.asc"), &dsm.layer(LayerKind::Z).expect("z layer"))?;
    let valid = (0..spec.len()).filter(|&k| dsm.is_valid(k)).count();
    let low = dsm.low_confidence.iter().filter(|&&b| b).count();
    out.json(
        "fuse.json",
        &FuseOutput {
            grid: spec,
            params,
            clouds: clouds.len(),
            valid_cells: valid,
            low_confidence_cells: low,
            layers: kinds.iter().map(|k| k.name()).collect(),
            seed: cfg.seed,
        },
    )?;
    println!("fused {} clouds: {valid}/{} cells valid, {low} low-confidence", clouds.len(), spec.len());
    Ok(())
}

// ------------------------------------------------------------------- evaluate

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Directory holding `z.f32`, `sigma_z.f32` and `sigma_h.f32`.
    pub dsm: Option<PathBuf>,
    /// Ground-truth elevation raster (`.f32` with sidecar).
    pub gt: Option<PathBuf>,
    /// Ground-truth sample spacing; defaults to the grid spacing.
    pub gt_spacing: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Directory of fused rasters.
    #[arg(long)]
    pub dsm: Option<PathBuf>,
    /// Ground-truth raster.
    #[arg(long)]
    pub gt: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluateOutput {
    plain: NdistSummary,
    neighborhood: NdistSummary,
    gt_spacing: f64,
    seed: u64,
}

fn load_dsm(dir: &Path) -> CliResult<DsmGrid> {
    let (z, _) = read_raster(&dir.join("z.f32"))?;
    let (sz, _) = read_raster(&dir.join("sigma_z.f32"))?;
    let (sh, _) = read_raster(&dir.join("sigma_h.f32"))?;
    if !z.spec.same_cells(&sz.spec) || !z.spec.same_cells(&sh.spec) {
        return Err(CliError::Config(format!("rasters in {} are not co-registered", dir.display())));
    }
    let mut dsm = DsmGrid::empty(z.spec);
    dsm.z = z.data;
    dsm.sigma_z = sz.data;
    dsm.sigma_h = sh.data;
    Ok(dsm)
}

pub fn evaluate(common: &Common, args: &EvaluateArgs) -> CliResult<()> {
    let mut cfg: EvaluateConfig = load_config(common.config.as_deref())?;
    override_opt(&mut cfg.dsm, &args.dsm);
    override_opt(&mut cfg.gt, &args.gt);
    override_val(&mut cfg.seed, common.seed);
    let dsm = load_dsm(require(&cfg.dsm, "dsm directory")?)?;
    let (gt, _) = read_raster(require(&cfg.gt, "ground-truth raster")?)?;
    let gt_spacing = cfg.gt_spacing.unwrap_or(dsm.spec.spacing);
    let plain = normalized_distance(&dsm, &gt)?;
    let near = neighborhood_normalized_distance(&dsm, &gt, &h90_grid(&dsm, gt_spacing)?)?;
    let out = Outputs::new(&common.out, &cfg, cfg.seed)?;
    write_raster(&out.path("ndist.f32"), &plain, LayerKind::Ndist, Some(&out.provenance))?;
    write_raster(&out.path("ndist_h90.f32"), &near, LayerKind::Ndist, Some(&out.provenance))?;
    let summary = EvaluateOutput {
        plain: NdistSummary::from_values(&plain.data),
        neighborhood: NdistSummary::from_values(&near.data),
        gt_spacing,
        seed: cfg.seed,
    };
    out.json("evaluate.json", &summary)?;
    println!(
        "within 1.644σ: {:.4} plain, {:.4} with r_h90 ({} cells)",
        summary.plain.fraction_within_1644, summary.neighborhood.fraction_within_1644, summary.plain.valid_cells
    );
    Ok(())
}

// ------------------------------------------------------------------------- tv

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvConfig {
    /// Disparity raster (`.f32` with sidecar); missing cells are invalid.
    pub disparity: Option<PathBuf>,
    pub theta: Option<f64>,
    pub n_max: u32,
    /// `(class, σ_disp)` knots.
    pub calibration: Vec<(f64, f64)>,
    pub seed: u64,
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig {
            disparity: None,
            theta: None,
            n_max: 10,
            calibration: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TvArgs {
    /// Disparity raster.
    #[arg(long)]
    pub disparity: Option<PathBuf>,
    /// Cumulative ring threshold.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Largest ring radius.
    #[arg(long)]
    pub n_max: Option<u32>,
}

#[derive(Serialize)]
struct TvOutput {
    theta: f64,
    n_max: u32,
    /// Pixel count per class, index = class.
    histogram: Vec<usize>,
    invalid: usize,
    seed: u64,
}

pub fn tv(common: &Common, args: &TvArgs) -> CliResult<()> {
    let mut cfg: TvConfig = load_config(common.config.as_deref())?;
    override_opt(&mut cfg.disparity, &args.disparity);
    if args.theta.is_some() {
        cfg.theta = args.theta;
    }
    override_val(&mut cfg.n_max, args.n_max);
    override_val(&mut cfg.seed, common.seed);
    let theta = cfg.theta.ok_or_else(|| CliError::Config("missing theta".into()))?;
    if cfg.calibration.is_empty() {
        return Err(CliError::Config("missing calibration table of (class, sigma) knots".into()));
    }
    let cal = TvCalibration::new(cfg.calibration.clone())?;
    let (raster, _) = read_raster(require(&cfg.disparity, "disparity raster")?)?;
    let spec = raster.spec;
    let grid = DisparityGrid::new(spec.width, spec.height, raster.data)?;
    let classes = tv_class(&grid, theta, cfg.n_max)?;
    let sigma = tv_to_sigma(&classes, &cal)?;
    let class_values: Vec<f64> = classes.classes.iter().map(|c| c.map_or(f64::NAN, f64::from)).collect();
    let out = Outputs::new(&common.out, &cfg, cfg.seed)?;
    write_raster(&out.path("class.f32"), &Raster::new(spec, class_values)?, LayerKind::Class, Some(&out.provenance))?;
    write_raster(&out.path("sigma_disp.f32"), &Raster::new(spec, sigma)?, LayerKind::SigmaDisp, Some(&out.provenance))?;
    let mut histogram = vec![0usize; cfg.n_max as usize + 1];
    let mut invalid = 0;
    for c in &classes.classes {
        match c {
            Some(c) => histogram[*c as usize] += 1,
            None => invalid += 1,
        }
    }
    out.json(
        "tv.json",
        &TvOutput {
            theta,
            n_max: cfg.n_max,
            histogram,
            invalid,
            seed: cfg.seed,
        },
    )?;
    println!("classified {} pixels ({invalid} invalid)", classes.classes.len());
    Ok(())
}

// ------------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSource {
    /// One of the published site layouts.
    Site(Site),
    /// Seventeen WorldView3 images in three passes.
    ThreePass,
    /// Random platforms, passes and angles.
    Random { n: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSimConfig {
    pub surface: Surface,
    pub grid: GridSpec,
    pub n_pairs: usize,
    #[serde(default)]
    pub sigma_xy: f64,
    #[serde(default)]
    pub sigma_z: f64,
    #[serde(default)]
    pub outlier_rate: f64,
    #[serde(default)]
    pub fr_sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpcSimConfig {
    /// Scene image to model.
    pub image: usize,
    pub perturbation: f64,
    pub gsd: f64,
    pub tile: TileBox,
}

impl Default for RpcSimConfig {
    fn default() -> Self {
        let p = PushbroomOptions::default();
        RpcSimConfig {
            image: 0,
            perturbation: p.perturbation,
            gsd: p.gsd,
            tile: default_tile(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scene: SceneSource,
    pub clouds: Option<CloudSimConfig>,
    pub rpc: Option<RpcSimConfig>,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            scene: SceneSource::ThreePass,
            clouds: None,
            rpc: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Published site layout: buenos_aires, wright_patterson, richmond, kandahar.
    #[arg(long, conflicts_with_all = ["random", "three_pass"])]
    pub site: Option<String>,
    /// Random scene with this many images.
    #[arg(long, conflicts_with = "three_pass")]
    pub random: Option<usize>,
    /// Seventeen-image, three-pass WorldView3 scene.
    #[arg(long)]
    pub three_pass: bool,
    /// Also write an RPC for the first image with this cubic distortion (px).
    #[arg(long)]
    pub rpc_perturbation: Option<f64>,
}

#[derive(Serialize)]
struct SimulateOutput {
    scene: SceneSource,
    images: usize,
    truth_enu: [f64; 3],
    condition_number: f64,
    warnings: Vec<String>,
    files: Vec<String>,
    seed: u64,
}

pub fn simulate(common: &Common, args: &SimulateArgs) -> CliResult<()> {
    let mut cfg: SimulateConfig = load_config(common.config.as_deref())?;
    if let Some(name) = &args.site {
        let site: Site = serde_json::from_value(serde_json::Value::String(name.clone()))
            .map_err(|_| CliError::Config(format!("unknown site {name}")))?;
        cfg.scene = SceneSource::Site(site);
    }
    if let Some(n) = args.random {
        cfg.scene = SceneSource::Random { n };
    }
    if args.three_pass {
        cfg.scene = SceneSource::ThreePass;
    }
    if let Some(p) = args.rpc_perturbation {
        cfg.rpc.get_or_insert_with(RpcSimConfig::default).perturbation = p;
    }
    override_val(&mut cfg.seed, common.seed);

    let scene = match &cfg.scene {
        SceneSource::Site(s) => site_scene(*s),
        SceneSource::ThreePass => three_pass_scene(cfg.seed),
        SceneSource::Random { n } => random_scene(*n, cfg.seed)?,
    };
    let sr = make_ray_bundle(&scene)?;
    let out = Outputs::new(&common.out, &cfg, cfg.seed)?;
    let mut files = vec!["scene.json".to_string()];
    geoerr_core::io::write_json(&out.path("scene.json"), &scene)?;

    if let Some(c) = &cfg.clouds {
        let mut opts = CloudOptions::noiseless(c.n_pairs, &c.grid, cfg.seed);
        opts.sigma_xy = c.sigma_xy;
        opts.sigma_z = c.sigma_z;
        opts.outlier_rate = c.outlier_rate;
        opts.fr_sigma = c.fr_sigma;
        let clouds = make_stereo_clouds(&c.surface, &c.grid, &opts)?;
        for cloud in &clouds {
            let name = format!("clouds/{}.bin", cloud.pair_id);
            write_cloud(&out.path(&name), cloud, DEFAULT_CLOUD_FRAME, Some(&out.provenance))?;
            files.push(name);
        }
        let gt = Raster::from_fn(c.grid, |i, j| {
            let [x, y] = c.grid.cell_center(i, j);
            c.surface.height(x, y)
        });
        write_raster(&out.path("gt.f32"), &gt, LayerKind::Z, Some(&out.provenance))?;
        files.push("gt.f32".into());
    }
    if let Some(r) = &cfg.rpc {
        let image = scene
            .images
            .get(r.image)
            .ok_or_else(|| CliError::Config(format!("rpc image {} out of range", r.image)))?;
        let pose = image.to_pose(scene.origin)?;
        let opts = PushbroomOptions {
            gsd: r.gsd,
            perturbation: r.perturbation,
            ..Default::default()
        };
        let cam = make_pushbroom_rpc(&pose, &r.tile, &opts)?;
        geoerr_core::io::write_json(&out.path("rpc.json"), &cam.rpc)?;
        files.push("rpc.json".into());
    }
    out.json(
        "simulate.json",
        &SimulateOutput {
            scene: cfg.scene.clone(),
            images: scene.images.len(),
            truth_enu: sr.truth.into(),
            condition_number: sr.condition_number,
            warnings: sr.warnings.clone(),
            files,
            seed: cfg.seed,
        },
    )?;
    println!("simulated {} images into {}", scene.images.len(), common.out.display());
    Ok(())
}

fn override_opt<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

fn override_val<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}
