use std::hint::black_box;

use contagion_bench::fixture;
use contagion_core::graph::build_graph;
use contagion_core::predict::all_predictors;
use contagion_core::sim::generate_corpus;
use contagion_core::solver::solve;
use contagion_core::{Direction, SimConfig, SolverConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const SIZES: [usize; 2] = [200, 1000];

fn corpus(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate_corpus");
    group.sample_size(10);
    for n in SIZES {
        let fx = fixture(n, 1, 1);
        let cfg = SimConfig { cascades_per_seed: 10, rng_seed: 1, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(n), &fx, |b, fx| {
            b.iter(|| generate_corpus(black_box(&fx.topology), &fx.truth, &cfg).unwrap())
        });
    }
    group.finish();
}

fn graph(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_graph");
    group.sample_size(10);
    for n in SIZES {
        let fx = fixture(n, 20, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &fx.store, |b, store| {
            b.iter(|| build_graph(black_box(store)).unwrap())
        });
    }
    group.finish();
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    for n in SIZES {
        let g = build_graph(&fixture(n, 20, 3).store).unwrap();
        let cfg = SolverConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| b.iter(|| solve(black_box(g), &cfg).unwrap()));
    }
    group.finish();
}

fn predictors(c: &mut Criterion) {
    let g = build_graph(&fixture(200, 20, 4).store).unwrap();
    let scores = solve(&g, &SolverConfig::default()).unwrap();
    c.bench_function("all_predictors/200", |b| {
        b.iter(|| all_predictors(black_box(&g), &scores, Direction::In).unwrap())
    });
}

criterion_group!(benches, corpus, graph, solver, predictors);
criterion_main!(benches);
