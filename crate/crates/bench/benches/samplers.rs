use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hsssi::analysis::{default_theta_grid, ecf_values};
use hsssi::limits::{limit_cf, CfQuery, KernelVariant, LimitKernel, LimitPool};
use hsssi::localtime::{estimate_local_time, UniformGrid};
use hsssi::model::ModelParams;
use hsssi::sampling::{sample_particle_field, PathSimulator, StableSampler};
use hsssi::{LevyModel, RngSpec, SlowlyVarying};
use hsssi_bench::first_order_system;

fn stable(c: &mut Criterion) {
    let s = StableSampler::new(1.5, 1.0);
    let mut rng = RngSpec::new(1, 0).rng();
    c.bench_function("stable_increment", |b| b.iter(|| black_box(s.sample(&mut rng))));
}

fn paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("path");
    for (name, model) in [
        ("pure", LevyModel::pure_stable(1.5)),
        ("log", LevyModel::rv_density(1.5, SlowlyVarying::Log)),
    ] {
        let sim = PathSimulator::new(&model, 1e-3).unwrap();
        g.bench_function(BenchmarkId::new("simulate_1e3_steps", name), |b| {
            let mut rng = RngSpec::new(2, 0).rng();
            b.iter(|| black_box(sim.simulate(1.0, &mut rng)))
        });
    }
    g.finish();
}

fn local_time(c: &mut Criterion) {
    let sim = PathSimulator::new(&LevyModel::pure_stable(1.5), 1e-3).unwrap();
    let path = sim.simulate(1.0, &mut RngSpec::new(3, 0).rng());
    let h = 1e-3f64.powf(1.0 / 1.5);
    let grid = UniformGrid::covering(-3.0, 3.0, h / 2.0);
    c.bench_function("local_time_field", |b| {
        b.iter(|| black_box(estimate_local_time(&path, grid, h, &[0.5, 1.0]).unwrap()))
    });
}

fn particles(c: &mut Criterion) {
    let params = ModelParams::new(1.5, 1.5, 1.0);
    c.bench_function("particle_field_window_100", |b| {
        let mut k = 0;
        b.iter(|| {
            k += 1;
            black_box(sample_particle_field(&params, SlowlyVarying::Constant(1.0), (-50.0, 50.0), &RngSpec::new(4, k)).unwrap())
        })
    });
    let sys = first_order_system();
    let mut g = c.benchmark_group("particle_functional");
    g.sample_size(10);
    g.bench_function("first_order_T100_x100", |b| {
        b.iter(|| black_box(sys.run(100.0, &[0.5, 1.0], 5, 100).unwrap()))
    });
    g.finish();
}

fn limits(c: &mut Criterion) {
    let pool = LimitPool {
        size: 50,
        dt: 1e-2,
        ..LimitPool::new(1.5, 6)
    };
    let q = CfQuery::new(default_theta_grid(), vec![1.0, 1.0], vec![0.5, 1.0]).unwrap();
    let mut g = c.benchmark_group("limit_cf_50_paths");
    g.sample_size(10);
    for (name, kernel) in [
        ("local_time", LimitKernel::LocalTime { int_phi: 1.0 }),
        (
            "heavy",
            LimitKernel::Heavy {
                variant: KernelVariant::Symmetric { gamma: 1.1 },
            },
        ),
    ] {
        g.bench_function(name, |b| b.iter(|| black_box(limit_cf(&pool, &kernel, 1.5, std::slice::from_ref(&q)).unwrap())));
    }
    g.finish();
}

fn ecf(c: &mut Criterion) {
    let s = StableSampler::new(1.5, 1.0);
    let mut rng = RngSpec::new(7, 0).rng();
    let xs: Vec<f64> = (0..10_000).map(|_| s.sample(&mut rng)).collect();
    let theta = default_theta_grid();
    c.bench_function("ecf_1e4_x16", |b| b.iter(|| black_box(ecf_values(&xs, &theta).unwrap())));
}

criterion_group!(benches, stable, paths, local_time, particles, limits, ecf);
criterion_main!(benches);
