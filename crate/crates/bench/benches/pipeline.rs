use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use robmaint::fractal::{sliding_fractal, window_fractal};
use robmaint::inference::forward_filter;
use robmaint::mdp::{EnsembleQ, DEFAULT_TOL};
use robmaint::presets::railway_truth;
use robmaint::{Horizon, PomdpModel};
use robmaint_bench::{dataset, ensemble, signal};

fn q_solve(c: &mut Criterion) {
    let model = PomdpModel::railway();
    let finite = model.with_horizon(Horizon::Finite(50)).unwrap();
    let mut g = c.benchmark_group("ensemble_q");
    g.sample_size(10);
    for n in [1_000, 12_000] {
        let e = ensemble(n);
        g.bench_with_input(BenchmarkId::new("infinite", n), &e, |b, e| {
            b.iter(|| EnsembleQ::solve(black_box(e), &model, DEFAULT_TOL).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("finite_50", n), &e, |b, e| {
            b.iter(|| EnsembleQ::solve(black_box(e), &finite, DEFAULT_TOL).unwrap())
        });
    }
    g.finish();
}

fn filter(c: &mut Criterion) {
    let data = dataset();
    let truth = railway_truth();
    c.bench_function("forward_filter_dataset", |b| {
        b.iter(|| {
            data.series
                .iter()
                .map(|s| forward_filter(black_box(s), &truth).unwrap().loglik)
                .sum::<f64>()
        })
    });
}

fn fractal(c: &mut Criterion) {
    let one = signal(150.0);
    let track = signal(250.0);
    let mut g = c.benchmark_group("fractal");
    g.sample_size(10);
    g.bench_function("window", |b| b.iter(|| window_fractal(black_box(&one), 0.0).unwrap()));
    g.bench_function("sliding_100_windows", |b| {
        b.iter(|| sliding_fractal(black_box(&track)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, q_solve, filter, fractal);
criterion_main!(benches);
