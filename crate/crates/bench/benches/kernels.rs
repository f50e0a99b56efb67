use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ordfactor::linalg::cholesky_lower;
use ordfactor::model::{ghk_tmvn, marginal_cov, ThresholdVector};
use ordfactor::priors::{induced_dirichlet_lpdf, CdfVariant, ThresholdPriorConfig};
use ordfactor_bench::{model, point};

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("log_posterior_and_gradient");
    for n in [150, 500] {
        for (label, prior) in
            [("joint", ThresholdPriorConfig::joint()), ("sequential", ThresholdPriorConfig::sequential_sd(1.5))]
        {
            let m = model(n, prior);
            let x = point(&m, 2);
            let mut g = vec![0.0; x.len()];
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                b.iter(|| m.log_posterior_and_gradient(black_box(&x), &mut g))
            });
        }
    }
    group.finish();
}

fn ghk(c: &mut Criterion) {
    let pop = ordfactor::simgen::PopulationParams::study1();
    let ls = pop.latent_structure().unwrap();
    let sigma = marginal_cov(&ls.loadings, &ls.factor_cov, &ls.residual_var).unwrap();
    let l = cholesky_lower(&sigma).unwrap();
    let tau: Vec<ThresholdVector> = (0..12).map(|_| ThresholdVector::new(vec![-2.0, -0.5, 0.5]).unwrap()).collect();
    let y: Vec<u16> = (0..12).map(|i| 1 + (i % 4) as u16).collect();
    let mu = vec![0.0; 12];
    let u: Vec<f64> = (0..12).map(|i| (i as f64 + 0.5) / 12.0).collect();
    c.bench_function("ghk_tmvn/12_items", |b| b.iter(|| ghk_tmvn(black_box(&y), &mu, &l, &tau, &u).unwrap()));
}

fn induced(c: &mut Criterion) {
    let tau = ThresholdVector::new(vec![-1.5, -0.5, 0.2, 1.1, 2.0]).unwrap();
    let alpha = vec![1.0; 6];
    c.bench_function("induced_dirichlet_lpdf/C=6", |b| {
        b.iter(|| induced_dirichlet_lpdf(black_box(&tau), &alpha, 0.0, CdfVariant::ExactNormal).unwrap())
    });
}

criterion_group!(benches, gradient, ghk, induced);
criterion_main!(benches);
