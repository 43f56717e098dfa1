use std::hint::black_box;

use brewsolve::augment::{sample_dirichlet_pool, select_cyclic, SelectionPlan};
use brewsolve::forward::{self, ForwardConfig};
use brewsolve::nn::{self, TrainPolicy};
use brewsolve::surrogate::SurrogateSpec;
use brewsolve::{Granulometry, Recipe};
use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;

fn simulator(c: &mut Criterion) {
    let cfg = ForwardConfig::default();
    let recipe = Recipe::new(93.0, 9.0, Granulometry::O, [0.25; 4]).unwrap();
    let mut g = c.benchmark_group("simulator");
    g.sample_size(10);
    g.bench_function("run default mesh", |b| b.iter(|| forward::f(&cfg, black_box(&recipe)).unwrap()));
    g.finish();
}

fn selection(c: &mut Criterion) {
    let plan = SelectionPlan::new(400).unwrap();
    let pool = sample_dirichlet_pool(50 * 400, 1);
    c.bench_function("select_cyclic M=400", |b| b.iter(|| select_cyclic(black_box(&pool), &plan).unwrap()));
}

fn training_epoch(c: &mut Criterion) {
    let n = 2048;
    let x = Array2::from_shape_fn((n, 7), |(i, j)| ((i * 7 + j) as f64 * 0.618).fract());
    let y = Array2::from_shape_fn((n, 8), |(i, k)| (x[[i, k % 7]] + 0.5 * x[[i, (k + 3) % 7]]).sin());
    let spec = SurrogateSpec::default();
    let policy = TrainPolicy {
        max_epochs: 1,
        ..TrainPolicy::default()
    };
    let obj = spec.objective();
    let mut g = c.benchmark_group("training");
    g.sample_size(10);
    g.bench_function("surrogate epoch 2048 rows", |b| {
        b.iter(|| {
            let mut net = spec.build(0).unwrap();
            nn::train(&mut net, (&x, &y), (&x, &y), &policy, &obj).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, simulator, selection, training_epoch);
criterion_main!(benches);
