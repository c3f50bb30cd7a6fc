use defaultable_affine::fourier::black_scholes;
use defaultable_affine::heston::closed_form_riccati;
use defaultable_affine::riccati::{solve, MeasureFlavor};
use defaultable_affine::*;
use proptest::prelude::*;

fn heston_generic() -> (AffineModelParams, SpecAffine, SpecAffine) {
    HestonJtdParams::reference().to_affine().unwrap()
}

fn premium(th: [f64; 3], theta: [[f64; 3]; 3], lq: [f64; 3]) -> RiskPremiumSpec {
    RiskPremiumSpec {
        thetahat: th.to_vec(),
        theta: Matrix::from_rows(&theta.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap(),
        lambda_q: SpecAffine::new(lq[0], vec![lq[1], lq[2], 0.0]),
    }
}

/// Premia satisfying both structure-preserving conditions on the reference model.
fn valid_premium() -> impl Strategy<Value = RiskPremiumSpec> {
    let (p, _, _) = heston_generic();
    let lo: Vec<f64> = (0..2)
        .map(|i| (p.sigma[(i, i)].powi(2) * p.beta[(i, i)] / 2.0 - p.b[i]) / p.sigma[(i, i)])
        .collect();
    (
        (0.0..1.0f64, 0.0..1.0f64, -1.0..1.0f64),
        (-2.0..2.0f64, 0.0..2.0f64, 0.0..2.0f64, -2.0..2.0f64),
        prop::array::uniform3(-1.0..1.0f64),
        (0.0..0.2f64, 0.0..1.0f64, 0.0..1.0f64),
    )
        .prop_map(move |((a, b, c), (t00, t01, t10, t11), row, (l0, l1, l2))| {
            premium(
                [lo[0] + a, lo[1] + b, c],
                [[t00, t01, 0.0], [t10, t11, 0.0], row],
                [l0, l1, l2],
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn valid_premia_give_admissible_risk_neutral_models(spec in valid_premium()) {
        let (p, _, rate) = heston_generic();
        let q = apply_measure_change(&p, &spec, &rate).unwrap();
        prop_assert!(validate_admissibility(&q.params).unwrap().is_ok());
    }

    #[test]
    fn feedback_from_the_log_price_is_rejected(spec in valid_premium(), i in 0usize..2, v in 0.01..1.0f64) {
        let (p, _, rate) = heston_generic();
        let mut bad = spec;
        let mut rows = bad.theta.to_rows();
        rows[i][2] = v;
        bad.theta = Matrix::from_rows(&rows).unwrap();
        match apply_measure_change(&p, &bad, &rate) {
            Err(Error::Rejected(r)) => prop_assert_eq!(r.clauses(), vec![Clause::PremiumII]),
            other => prop_assert!(false, "{:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn closed_form_matches_numeric_riccati(
        z1 in -3.0..0.0f64, z2 in -3.0..0.0f64, u1 in -5.0..5.0f64, u2 in -5.0..5.0f64,
        w in -10.0..10.0f64, t in 0.0..3.0f64,
    ) {
        let h = HestonJtdParams::reference();
        let p = HestonPremium::reference();
        let z = [C64::new(z1, u1), C64::new(z2, u2), C64::new(0.0, w)];
        let (phi, psi) = closed_form_riccati(&h, &p, &z, t).unwrap();
        let q = heston::risk_neutral_model(&h, &p).unwrap();
        let sol = solve(&q.params, &MeasureFlavor::risk_neutral(q.lambda_q.clone()), &q.rate, &z, t).unwrap();
        let (nphi, npsi) = sol.at(t);
        prop_assert!((phi - nphi).norm() < 1e-7);
        for k in 0..3 {
            prop_assert!((psi[k] - npsi[k]).norm() < 1e-7);
        }
    }

    #[test]
    fn implied_vol_inverts_black_scholes(vol in 0.01..2.0f64, m in 0.5..2.0f64, t in 0.1..5.0f64, df in 0.5..1.0f64) {
        for kind in [OptionKind::Call, OptionKind::Put] {
            let price = black_scholes(kind, 1.0, m, t, df, vol);
            // Skip prices indistinguishable from the no-arbitrage bounds.
            let bound = black_scholes(kind, 1.0, m, t, df, 1e-6);
            prop_assume!(price - bound > 1e-9);
            let v = implied_vol(kind, price, 1.0, m, t, df).unwrap();
            prop_assert!((v - vol).abs() < 1e-6, "{:?} {} vs {}", kind, v, vol);
        }
    }

    #[test]
    fn survival_and_bonds_are_ordered(t1 in 0.0..3.0f64, dt in 0.0..2.0f64, v0 in 0.01..0.3f64, y0 in 0.0001..0.02f64) {
        let ctx = PricingContext::heston(&HestonJtdParams::reference(), &HestonPremium::reference())
            .unwrap()
            .at(0.0, vec![v0, y0, 0.0])
            .unwrap();
        let (s1, s2) = (survival_probability(&ctx, t1).unwrap(), survival_probability(&ctx, t1 + dt).unwrap());
        prop_assert!(0.0 < s2 && s2 <= s1 && s1 <= 1.0);
        let (pi, rf) = (defaultable_bond(&ctx, t1).unwrap(), riskfree_bond(&ctx, t1).unwrap());
        prop_assert!(pi <= rf + 1e-14 && rf <= 1.0 + 1e-14, "{} {}", pi, rf);
    }
}
