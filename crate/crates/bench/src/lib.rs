//! Benchmarks for the sampling, condensation, convolution, optimization
//! and logic-harness hot paths.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};
use fbst_core::gfbst::{check_logical_properties, GridModel, TestRule};
use fbst_core::model::{make_gaussian_mean_model, polynomial_regression, Hypothesis, SigmaScale};
use fbst_core::modelsel::{selection_table, SAKAMOTO_X, SAKAMOTO_Y};
use fbst_core::optimizer::{maximize_surprise, OptimizerConfig};
use fbst_core::sampler::{sample_posterior, SamplerConfig};
use fbst_core::truth::estimate_truth_ladder;
use fbst_core::{mellin_convolve, Algorithm};

fn small_sampler(seed: u64) -> SamplerConfig {
    SamplerConfig {
        burn_in: 2_000,
        ..SamplerConfig::default()
    }
    .with_total_draws(20_000)
    .with_seed(seed)
}

pub fn sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampling");
    g.sample_size(10);
    let gaussian = make_gaussian_mean_model(1.0, 1.0).unwrap();
    let regression = polynomial_regression(&SAKAMOTO_X, &SAKAMOTO_Y, 3, SigmaScale::LogSigma).unwrap();
    g.bench_function("gaussian-20k", |b| b.iter(|| sample_posterior(&gaussian, &small_sampler(1)).unwrap()));
    for algorithm in [Algorithm::Metropolis, Algorithm::HitAndRun] {
        let cfg = SamplerConfig {
            algorithm,
            ..small_sampler(2)
        };
        g.bench_with_input(BenchmarkId::new("regression-order3-20k", format!("{algorithm:?}")), &cfg, |b, cfg| {
            b.iter(|| sample_posterior(&regression, cfg).unwrap())
        });
    }
    g.finish();
}

pub fn condensation(c: &mut Criterion) {
    let mut g = c.benchmark_group("condensation");
    let model = polynomial_regression(&SAKAMOTO_X, &SAKAMOTO_Y, 2, SigmaScale::LogSigma).unwrap();
    let sample = sample_posterior(&model, &SamplerConfig::default().with_seed(3)).unwrap();
    for n_max in [128, 512, 2048] {
        g.bench_with_input(BenchmarkId::new("ladder-200k", n_max), &n_max, |b, &n| {
            b.iter(|| estimate_truth_ladder(black_box(&sample), n).unwrap())
        });
    }
    g.finish();
}

pub fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("convolution");
    let m = make_gaussian_mean_model(0.0, 1.0).unwrap();
    let s1 = sample_posterior(&m, &small_sampler(4)).unwrap();
    let s2 = sample_posterior(&m, &small_sampler(5)).unwrap();
    for n_max in [256, 1024] {
        let (a, b2) = (estimate_truth_ladder(&s1, n_max).unwrap(), estimate_truth_ladder(&s2, n_max).unwrap());
        g.bench_with_input(BenchmarkId::new("mellin", n_max), &n_max, |b, &n| {
            b.iter(|| mellin_convolve(black_box(&a), black_box(&b2), n))
        });
    }
    g.finish();
}

pub fn optimization(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimizer");
    g.sample_size(10);
    let model = polynomial_regression(&SAKAMOTO_X, &SAKAMOTO_Y, 3, SigmaScale::LogSigma).unwrap();
    let h = Hypothesis::coordinate_equals(model.dim(), 3, 0.0);
    let closed = OptimizerConfig::default();
    let generic = OptimizerConfig {
        generic_only: true,
        ..OptimizerConfig::default()
    };
    g.bench_function("closed-form", |b| b.iter(|| maximize_surprise(&model, &h, None, &closed).unwrap()));
    g.bench_function("multistart", |b| b.iter(|| maximize_surprise(&model, &h, None, &generic).unwrap()));
    g.finish();
}

pub fn logic_harness(c: &mut Criterion) {
    let mut g = c.benchmark_group("logic");
    let grid = GridModel::random(20, 20, 1);
    g.bench_function("grid-20x20-100-trials", |b| {
        b.iter(|| check_logical_properties(&grid, 100, 0.05, 1, TestRule::Gfbst).unwrap())
    });
    g.finish();
}

pub fn selection(c: &mut Criterion) {
    c.bench_function("selection-table-deterministic", |b| {
        b.iter(|| selection_table(black_box(&SAKAMOTO_X), black_box(&SAKAMOTO_Y), 5, None).unwrap())
    });
}
