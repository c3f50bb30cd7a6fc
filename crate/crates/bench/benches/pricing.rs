use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use defaultable_affine::heston::{risk_neutral_model, HestonTransform};
use defaultable_affine::montecarlo::simulate_risk_neutral;
use defaultable_affine::*;

fn reference() -> PricingContext {
    PricingContext::heston(&HestonJtdParams::reference(), &HestonPremium::reference()).unwrap()
}

fn riccati(c: &mut Criterion) {
    let q = risk_neutral_model(&HestonJtdParams::reference(), &HestonPremium::reference()).unwrap();
    let closed = HestonTransform::new(&q.params, &q.flavor(), &q.rate).unwrap();
    let numeric = NumericTransform::new(q.params.clone(), q.flavor(), q.rate.clone());
    let z = [C64::new(-0.5, 1.0), C64::new(-0.2, -2.0), C64::new(0.0, 3.0)];
    let mut g = c.benchmark_group("riccati");
    g.bench_function("closed_form", |b| b.iter(|| closed.coefficients(black_box(&z), 2.0).unwrap()));
    g.bench_function("numeric", |b| b.iter(|| numeric.coefficients(black_box(&z), 2.0).unwrap()));
    g.finish();
}

fn fourier(c: &mut Criterion) {
    let ctx = reference();
    let (d, cfg) = (DampingConfig::default(), QuadratureConfig::default());
    let mut g = c.benchmark_group("fourier");
    g.bench_function("call", |b| b.iter(|| call_price(&ctx, black_box(1.1), 1.0, &d, &cfg).unwrap()));
    g.bench_function("distribution", |b| {
        b.iter(|| survival_distribution(&ctx, black_box(0.9), 1.0, &cfg).unwrap())
    });
    g.sample_size(10);
    g.bench_function("surface_7x13", |b| {
        b.iter(|| {
            surface(
                &ctx,
                &fourier::default_maturities(),
                &fourier::default_moneyness(),
                &d,
                &cfg,
                SurfaceMethod::Direct,
            )
            .unwrap()
        })
    });
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let ctx = reference();
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    for scheme in [Scheme::ExactCir, Scheme::Euler] {
        let cfg = SimConfig::new(20_000, 64, 1, scheme).unwrap();
        g.bench_function(format!("{scheme:?}_20k_paths_1y"), |b| {
            b.iter(|| simulate_risk_neutral(&ctx, &[1.0], &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, riccati, fourier, monte_carlo);
criterion_main!(benches);
