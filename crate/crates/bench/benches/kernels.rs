use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use forge_core::experiment::ExperimentConfig;
use forge_core::geometry::SurfaceSpec;
use forge_core::grid::SpatialGrid;
use forge_core::solver::{Coefficients, NoForcing, WaveScheme};
use forge_core::BumpA;

fn stencil_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("stencil_step");
    for (dim, nodes) in [(1, 801), (2, 129), (3, 33)] {
        let grid = SpatialGrid::new(dim, nodes, 4.0).unwrap();
        let coeffs = Coefficients::flat(&grid);
        let ds = coeffs.max_step(&grid, 0.5);
        let scheme = WaveScheme::new(&grid, &coeffs, ds, 0.5).unwrap();
        let w0: Vec<f64> = grid.points().iter().map(|x| (-x[0] * x[0]).exp()).collect();
        let mut st = scheme.start(0.01, w0.clone(), w0, &NoForcing);
        group.bench_with_input(BenchmarkId::new("dim", dim), &dim, |b, _| {
            b.iter(|| scheme.advance(black_box(&mut st), &NoForcing))
        });
    }
    group.finish();
}

fn bump_eval(c: &mut Criterion) {
    let a = BumpA::new(14);
    let xs: Vec<[f64; 2]> = (0..1000).map(|i| [0.002 * i as f64, 0.5]).collect();
    c.bench_function("bump_value_1000", |b| b.iter(|| xs.iter().map(|x| a.value(black_box(x))).sum::<f64>()));
}

fn solve_x1(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::default();
    cfg.model.dim = 2;
    cfg.grid.nodes = 33;
    cfg.surface = SurfaceSpec::Quadratic { ell: 0.3, a: 0.1 };
    let bundle = cfg.stack_inputs().unwrap().bundle().unwrap();
    let ys: Vec<[f64; 2]> = (0..100).map(|i| [-0.5 + 0.01 * i as f64, 0.1]).collect();
    c.bench_function("solve_x1_100", |b| {
        b.iter(|| ys.iter().map(|y| bundle.solve_x1(black_box(y), 1e-12).unwrap()).sum::<f64>())
    });
}

fn level_build(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::default();
    cfg.grid.nodes = 201;
    cfg.grid.per_octave = 8;
    let inputs = cfg.stack_inputs().unwrap();
    let mut group = c.benchmark_group("ansatz");
    group.sample_size(10);
    group.bench_function("stack_build_201", |b| b.iter(|| inputs.build().unwrap()));
    group.finish();
}

criterion_group!(benches, stencil_step, bump_eval, solve_x1, level_build);
criterion_main!(benches);
