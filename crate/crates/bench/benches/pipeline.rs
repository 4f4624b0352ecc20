//! Hot-path benchmarks: dense complex Cholesky, the crossing-rate
//! quadrature, realization sampling with crossing counts, the ETFE filter
//! bank, and posterior prediction.

use std::f64::consts::PI;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use hinfgp::excursion::{expected_upcrossings, ExcursionQuery};
use hinfgp::kernels::{geometric_kernel, hermitian_gramian, ComplexKernel, SequenceSpec};
use hinfgp::linalg::{cholesky, HermitianMatrix};
use hinfgp::montecarlo::mc_gain_statistics;
use hinfgp::regression::{Dataset, RegressionModel};
use hinfgp::sysid::{etfe, simulate, zoh_second_order, FilterBankConfig};

fn circle_points(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::from_polar(1.0, -3.0 + 6.0 * i as f64 / n as f64))
        .collect()
}

fn bench_cholesky(c: &mut Criterion) {
    let kern = geometric_kernel(0.5).unwrap();
    let mut group = c.benchmark_group("cholesky");
    for n in [25usize, 50, 100] {
        let points = circle_points(n);
        let gram = hermitian_gramian(&kern, &points);
        let noisy = HermitianMatrix::from_fn(n, |i, j| {
            gram.get(i, j)
                + if i == j {
                    Complex64::new(1e-2, 0.0)
                } else {
                    Complex64::ZERO
                }
        });
        group.bench_with_input(BenchmarkId::from_parameter(n), &noisy, |b, m| {
            b.iter(|| cholesky(m, 1e-12).unwrap())
        });
    }
    group.finish();
}

fn bench_upcrossing_quadrature(c: &mut Criterion) {
    let kern: Arc<dyn ComplexKernel> = Arc::new(geometric_kernel(0.5).unwrap());
    c.bench_function("expected_upcrossings 100x64", |b| {
        let mut q = ExcursionQuery::new(kern.clone(), 1.5);
        q.n_omega = 100;
        q.n_theta = 64;
        b.iter(|| expected_upcrossings(&q).unwrap())
    });
}

fn bench_mc_sampling(c: &mut Criterion) {
    let spec = SequenceSpec::geometric(0.5).unwrap();
    c.bench_function("mc gains 1000 paths", |b| {
        b.iter(|| mc_gain_statistics(&spec, &[1.0, 2.0], 1000, 7, 4096))
    });
}

fn bench_etfe(c: &mut Criterion) {
    let plant = zoh_second_order(20.0 * PI, 0.1, 100.0).unwrap();
    let cfg = FilterBankConfig::default_bank();
    let input: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5).collect();
    let output = simulate(&plant, &input);
    c.bench_function("etfe 25x1000", |b| {
        b.iter(|| etfe(&cfg, &input, &output, 1e-4).unwrap())
    });
}

fn bench_prediction(c: &mut Criterion) {
    let kern: Arc<dyn ComplexKernel> = Arc::new(geometric_kernel(0.5).unwrap());
    let points = circle_points(25);
    let ys: Vec<Complex64> = points.iter().map(|z| z * z).collect();
    let data = Dataset::new(points, ys, 1e-3).unwrap();
    let model = RegressionModel::new(kern, data).unwrap();
    c.bench_function("predict_strict 200 grid points", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..200 {
                let z = Complex64::from_polar(1.0, (i as f64 + 0.5) * PI / 200.0);
                acc += model.predict_strict(z).unwrap().hermitian_variance;
            }
            acc
        })
    });
}

criterion_group!(
    benches,
    bench_cholesky,
    bench_upcrossing_quadrature,
    bench_mc_sampling,
    bench_etfe,
    bench_prediction
);
criterion_main!(benches);
