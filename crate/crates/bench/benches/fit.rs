use std::hint::black_box;

use censurv::loess::fit_weighted_loess;
use censurv::simgen::{generate, ScenarioConfig, ScenarioVariant};
use censurv::{fit_cnb, fit_cox, CnbConfig, CoxConfig, LoessConfig, SurvivalPredictor};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn weibull(n: usize) -> censurv::simgen::SimulatedDataset {
    generate(
        &ScenarioConfig::new(ScenarioVariant::WeibullPh, n, 0.0, 0.0),
        1,
    )
    .unwrap()
}

fn fitting(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    for n in [1000, 5000] {
        let sim = weibull(n);
        group.bench_with_input(BenchmarkId::new("cnb", n), &sim.data, |b, d| {
            b.iter(|| fit_cnb(black_box(d), &CnbConfig::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cox", n), &sim.data, |b, d| {
            b.iter(|| fit_cox(black_box(d), &CoxConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn prediction(c: &mut Criterion) {
    let sim = weibull(5000);
    let nb = fit_cnb(&sim.data, &CnbConfig::default()).unwrap();
    let cox = fit_cox(&sim.data, &CoxConfig::default()).unwrap();
    c.bench_function("predict/cnb 5000", |b| {
        b.iter(|| nb.event_probabilities(black_box(&sim.data), 7.0).unwrap())
    });
    c.bench_function("predict/cox 5000", |b| {
        b.iter(|| cox.event_probabilities(black_box(&sim.data), 7.0).unwrap())
    });
}

fn smoothing(c: &mut Criterion) {
    let xs: Vec<f64> = (0..1000).map(|i| i as f64 / 100.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| x.sin() + 0.1 * (x * 37.0).cos())
        .collect();
    let ws = vec![1.0; xs.len()];
    for degree in [1, 2] {
        let cfg = LoessConfig {
            degree,
            ..LoessConfig::default()
        };
        c.bench_function(&format!("loess/degree {degree} 1000"), |b| {
            b.iter(|| fit_weighted_loess(black_box(&xs), &ys, &ws, &cfg).unwrap())
        });
    }
}

criterion_group!(benches, fitting, prediction, smoothing);
criterion_main!(benches);
