//! Analytic prices against independent references: hand-derived constant-hazard
//! reductions and Monte Carlo at moderate path counts.

use defaultable_affine::montecarlo::{simulate_physical, simulate_risk_neutral};
use defaultable_affine::*;

fn reference() -> PricingContext {
    PricingContext::heston(&HestonJtdParams::reference(), &HestonPremium::reference()).unwrap()
}

fn constant_hazard(lambda: f64, r: f64) -> PricingContext {
    let (p, _, _) = HestonJtdParams::reference().to_affine().unwrap();
    let lp = SpecAffine::constant(lambda, 3);
    PricingContext::new(p, lp.clone(), &RiskPremiumSpec::zero(&lp), SpecAffine::constant(r, 3)).unwrap()
}

#[test]
fn constant_hazard_reductions() {
    let (l, r) = (0.03, 0.02);
    let ctx = constant_hazard(l, r);
    for t in [0.5, 1.0, 5.0] {
        assert!((survival_probability(&ctx, t).unwrap() - (-l * t).exp()).abs() < 1e-8);
        assert!((defaultable_bond(&ctx, t).unwrap() - (-(l + r) * t).exp()).abs() < 1e-8);
        assert!((riskfree_bond(&ctx, t).unwrap() - (-r * t).exp()).abs() < 1e-8);
    }
    let sched = CdsSchedule::regular(0.0, 3.0, 2, 0.4).unwrap();
    let q = cds_quote(&ctx, &sched).unwrap();
    let prot = 0.4 * l / (l + r) * (1.0 - (-(l + r) * 3.0f64).exp());
    let ann: f64 = (1..=6).map(|k| 0.5 * (-(l + r) * 0.5 * k as f64).exp()).sum();
    assert!((q.protection_leg - prot).abs() < 1e-8);
    assert!((q.premium_annuity - ann).abs() < 1e-8);
}

#[test]
fn recovery_with_a_stock_payoff() {
    // Pays S at default. Default is independent of the stock, whose
    // pre-default value grows at mu under a zero premium:
    // int_0^T lambda e^{-lambda u} S0 e^{mu u} du.
    let (l, mu) = (0.05, HestonJtdParams::reference().mu);
    let ctx = constant_hazard(l, 0.0);
    let mut z = vec![C64::new(0.0, 0.0); 3];
    z[2] = C64::new(1.0, 0.0);
    let g = PayoffBundle::single(C64::new(1.0, 0.0), z);
    let v = pure_recovery_value(&ctx, 2.0, &g).unwrap();
    let exact = l * ctx.spot() * (((mu - l) * 2.0).exp() - 1.0) / (mu - l);
    assert!((v.re - exact).abs() < 1e-8, "{} vs {exact}", v.re);
}

#[test]
fn monte_carlo_agrees_on_both_measures() {
    let ctx = reference();
    let cfg = SimConfig::new(100_000, 32, 2024, Scheme::ExactCir).unwrap();
    let qcfg = QuadratureConfig::default();
    let p = simulate_physical(&ctx, &[1.0], &cfg).unwrap();
    let f = estimate(&p, &Functional::Distribution { level: 1.0, maturity: 1.0 }).unwrap();
    let exact = survival_distribution(&ctx, 1.0, 1.0, &qcfg).unwrap();
    assert!(f.covers(exact, 3.0), "{f:?} vs {exact}");

    let sched = CdsSchedule::regular(0.0, 1.0, 4, 0.6).unwrap();
    let q = simulate_risk_neutral(&ctx, &sched.dates, &cfg).unwrap();
    let d = DampingConfig::default();
    let put = estimate(&q, &Functional::Put { strike: 0.9, maturity: 1.0 }).unwrap();
    let exact = put_price(&ctx, 0.9, 1.0, &d, &qcfg).unwrap().value;
    assert!(put.covers(exact, 3.0), "{put:?} vs {exact}");
    let s = estimate(&q, &Functional::CdsSpread { schedule: sched.clone() }).unwrap();
    let exact = cds_spread(&ctx, &sched).unwrap();
    assert!(s.covers(exact, 3.0), "{s:?} vs {exact}");
}

#[test]
fn euler_bias_is_below_noise() {
    let ctx = reference();
    let run = |steps| {
        let cfg = SimConfig::new(50_000, steps, 99, Scheme::Euler).unwrap();
        estimate(&simulate_physical(&ctx, &[1.0], &cfg).unwrap(), &Functional::Survival { maturity: 1.0 }).unwrap()
    };
    let (coarse, fine) = (run(128), run(256));
    assert!((coarse.value - fine.value).abs() < coarse.se, "{coarse:?} {fine:?}");
}
