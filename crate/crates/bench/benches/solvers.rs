use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geoerr_bench::{gable_clouds, scene_rays};
use geoerr_core::intersect::{
    intersect_unweighted, intersect_weighted, mig_covariance, mig_inputs, monte_carlo_scatter, MonteCarloOptions,
    MonteCarloScene,
};
use geoerr_core::local::{fuse_dsm, FusionParams};
use std::hint::black_box;

fn intersection(c: &mut Criterion) {
    let mut g = c.benchmark_group("intersect");
    for n in [3usize, 17, 44] {
        let sr = scene_rays(n);
        g.bench_with_input(BenchmarkId::new("weighted", n), &sr, |b, sr| {
            b.iter(|| intersect_weighted(black_box(&sr.bundle)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("unweighted", n), &sr, |b, sr| {
            b.iter(|| intersect_unweighted(black_box(&sr.bundle)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mig", n), &sr, |b, sr| {
            b.iter(|| {
                let m = mig_inputs(&sr.bundle, &sr.states, sr.pose_with_kappa.clone(), 2.0).unwrap();
                mig_covariance(&m.b, &m.b_p, &m.sigma_p).unwrap()
            })
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let sr = scene_rays(17);
    let scene = MonteCarloScene::new(sr.bundle.rays().to_vec(), sr.jacobian.clone(), sr.pose.clone()).unwrap();
    let mut g = c.benchmark_group("montecarlo");
    g.sample_size(10);
    g.bench_function("weighted_10k", |b| {
        b.iter(|| monte_carlo_scatter(&scene, 10_000, 1, MonteCarloOptions { weighted: true }).unwrap())
    });
    g.finish();
}

fn fusion(c: &mut Criterion) {
    let (spec, clouds) = gable_clouds(128, 8);
    let params = FusionParams::for_spacing(spec.spacing);
    let mut g = c.benchmark_group("fuse");
    g.sample_size(10);
    g.bench_function("128x128_8_pairs", |b| b.iter(|| fuse_dsm(black_box(&clouds), &spec, &params).unwrap()));
    g.finish();
}

criterion_group!(benches, intersection, monte_carlo, fusion);
criterion_main!(benches);
