//! Sequential vs. pooled execution for the solver's hot kernels, plus the
//! cost of exact reductions relative to plain summation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use skymap_core::{
    fast_dot, repro_dot, solve_reduced, AngularGrid, LaplacianStencil, MeasurementRecord,
    Parallelism, SignalField, SolverConfig,
};

fn contexts() -> Vec<(String, Parallelism)> {
    let mut out = vec![("seq".to_string(), Parallelism::Sequential)];
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cpus > 1 {
        out.push((format!("pool{cpus}"), Parallelism::from_workers(cpus)));
    }
    out
}

fn pseudo_values(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed | 1;
    (0..n)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 40.0 - 120.0
        })
        .collect()
}

fn bench_reductions(c: &mut Criterion) {
    let n = 1 << 21;
    let a = pseudo_values(n, 1);
    let b = pseudo_values(n, 2);
    let mut group = c.benchmark_group("dot");
    for (name, exec) in contexts() {
        group.bench_with_input(BenchmarkId::new("exact", &name), &exec, |bench, exec| {
            bench.iter(|| repro_dot(exec, &a, &b))
        });
        group.bench_with_input(BenchmarkId::new("plain", &name), &exec, |bench, exec| {
            bench.iter(|| fast_dot(exec, &a, &b))
        });
    }
    group.finish();
}

fn bench_operator(c: &mut Criterion) {
    let grid = AngularGrid::new(1440, 361).unwrap();
    let st = LaplacianStencil::new(grid);
    let u = SignalField::from_values(grid, pseudo_values(grid.len(), 3)).unwrap();
    let mut group = c.benchmark_group("laplacian");
    for (name, exec) in contexts() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &exec, |bench, exec| {
            bench.iter(|| st.apply_with(&u, exec))
        });
    }
    group.finish();
}

fn synthetic_arcs(grid: AngularGrid, days: usize) -> Vec<MeasurementRecord> {
    let mut records = Vec::new();
    for d in 0..days {
        let season = (2.0 * std::f64::consts::PI * d as f64 / days.max(1) as f64).cos();
        let half_span = 80.0 + 40.0 * season;
        let peak = 35.0 + 22.0 * season;
        let samples = 4 * grid.width().min(600);
        for s in 0..samples {
            let t = s as f64 / (samples - 1) as f64;
            let az = (180.0 - half_span + 2.0 * half_span * t).rem_euclid(360.0);
            let el = peak * (std::f64::consts::PI * t).sin();
            records.push(MeasurementRecord {
                timestamp: (d * samples + s) as f64,
                azimuth_deg: az,
                elevation_deg: el.clamp(0.0, 90.0),
                level_dbm: -95.0 + 6.0 * (std::f64::consts::PI * t).sin(),
            });
        }
    }
    records
}

fn bench_solve(c: &mut Criterion) {
    let grid = AngularGrid::new(240, 61).unwrap();
    let st = LaplacianStencil::new(grid);
    let records = synthetic_arcs(grid, 40);
    let (field, mask) = skymap_core::rasterize(grid, &records);
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let worker_counts = if cpus > 1 { vec![1, cpus] } else { vec![1] };
    for workers in worker_counts {
        let cfg = SolverConfig {
            epsilon: 1e-6,
            workers,
            ..SolverConfig::default()
        };
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("workers{workers}")),
            &cfg,
            |bench, cfg| bench.iter(|| solve_reduced(&st, &mask, &field, cfg).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_reductions, bench_operator, bench_solve);
criterion_main!(benches);
