//! Survival probabilities, bonds, recovery legs and CDS spreads.
//!
//! Every value is pre-default: the `1_{tau > t}` factor is implied.

use serde::{Deserialize, Serialize};

use crate::affine::{validate_admissibility, AffineModelParams, Clause, SpecAffine};
use crate::error::{Error, Result};
use crate::heston::{risk_neutral_model, HestonJtdParams, HestonPremium, HestonTransform};
use crate::measures::{apply_measure_change, QModelParams, RiskPremiumSpec};
use crate::ode::OdeTolerance;
use crate::quadrature::rule;
use crate::riccati::{AffineTransform, MeasureFlavor, NumericTransform, C64};

/// How `(Phi, Psi)` are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Numeric,
    HestonClosedForm,
}

/// Transform under one flavor, from either backend.
#[derive(Clone, Debug)]
pub enum Transform {
    Numeric(NumericTransform),
    Heston(HestonTransform),
}

impl Transform {
    fn build(
        backend: Backend,
        params: &AffineModelParams,
        flavor: MeasureFlavor,
        rate: &SpecAffine,
        tol: OdeTolerance,
    ) -> Result<Self> {
        Ok(match backend {
            Backend::Numeric => {
                Transform::Numeric(NumericTransform::new(params.clone(), flavor, rate.clone()).with_tolerance(tol))
            }
            Backend::HestonClosedForm => Transform::Heston(HestonTransform::new(params, &flavor, rate)?),
        })
    }
}

impl AffineTransform for Transform {
    fn dim(&self) -> usize {
        match self {
            Transform::Numeric(t) => t.dim(),
            Transform::Heston(t) => t.dim(),
        }
    }

    fn coefficients(&self, z: &[C64], tau: f64) -> Result<(C64, Vec<C64>)> {
        match self {
            Transform::Numeric(t) => t.coefficients(z, tau),
            Transform::Heston(t) => t.coefficients(z, tau),
        }
    }
}

/// Physical and risk-neutral model seen from valuation time `t` in state `x`.
#[derive(Clone, Debug)]
pub struct PricingContext {
    pub p_params: AffineModelParams,
    pub lambda_p: SpecAffine,
    pub q: QModelParams,
    pub t: f64,
    pub x: Vec<f64>,
    pub tol: OdeTolerance,
    pub backend: Backend,
}

impl PricingContext {
    /// Validates both measures and derives the risk-neutral parameters.
    pub fn new(
        p_params: AffineModelParams,
        lambda_p: SpecAffine,
        premium: &RiskPremiumSpec,
        rate: SpecAffine,
    ) -> Result<Self> {
        let mut report = validate_admissibility(&p_params)?;
        report.extend(lambda_p.check(p_params.d, p_params.m, Clause::AffineFunctional)?);
        report.extend(rate.check(p_params.d, p_params.m, Clause::AffineFunctional)?);
        report.into_result()?;
        let q = apply_measure_change(&p_params, premium, &rate)?;
        Ok(Self {
            x: p_params.x0.clone(),
            p_params,
            lambda_p,
            q,
            t: 0.0,
            tol: OdeTolerance::default(),
            backend: Backend::Numeric,
        })
    }

    /// Heston jump-to-default model; transforms use the closed form.
    pub fn heston(h: &HestonJtdParams, premium: &HestonPremium) -> Result<Self> {
        let (p_params, lambda_p, _) = h.to_affine()?;
        let q = risk_neutral_model(h, premium)?;
        Ok(Self {
            x: p_params.x0.clone(),
            p_params,
            lambda_p,
            q,
            t: 0.0,
            tol: OdeTolerance::default(),
            backend: Backend::HestonClosedForm,
        })
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_tolerance(mut self, tol: OdeTolerance) -> Self {
        self.tol = tol;
        self
    }

    /// Moves valuation to time `t` and pre-default state `x`.
    pub fn at(mut self, t: f64, x: Vec<f64>) -> Result<Self> {
        if x.len() != self.p_params.d {
            return Err(Error::structural(format!("state must have {} components", self.p_params.d)));
        }
        if !self.p_params.is_interior(&x) || !(t >= 0.0) {
            return Err(Error::invalid("valuation state must be interior and t nonnegative"));
        }
        self.t = t;
        self.x = x;
        Ok(self)
    }

    /// Same context with the risk-neutral intensity removed.
    pub fn default_free(&self) -> Self {
        Self {
            q: self.q.default_free(),
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.p_params.d
    }

    /// Current stock price `exp(L_t)`.
    pub fn spot(&self) -> f64 {
        self.x[self.dim() - 1].exp()
    }

    pub fn horizon(&self, maturity: f64) -> Result<f64> {
        if !(maturity >= self.t) {
            return Err(Error::invalid(format!("maturity {maturity} precedes valuation time {}", self.t)));
        }
        Ok(maturity - self.t)
    }

    pub fn physical(&self) -> Result<Transform> {
        let zero = SpecAffine::zero(self.dim());
        Transform::build(self.backend, &self.p_params, MeasureFlavor::physical(self.lambda_p.clone()), &zero, self.tol)
    }

    pub fn risk_neutral(&self) -> Result<Transform> {
        Transform::build(self.backend, &self.q.params, self.q.flavor(), &self.q.rate, self.tol)
    }

    pub fn riskfree(&self) -> Result<Transform> {
        let flavor = MeasureFlavor::risk_neutral(SpecAffine::zero(self.dim()));
        Transform::build(self.backend, &self.q.params, flavor, &self.q.rate, self.tol)
    }

    pub(crate) fn zero_arg(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.dim()]
    }

    /// `e_d * s`, the argument that loads on the log price only.
    pub(crate) fn log_price_arg(&self, s: C64) -> Vec<C64> {
        let mut z = self.zero_arg();
        z[self.dim() - 1] = s;
        z
    }
}

/// `P(tau > T | tau > t, X_t = x)`
pub fn survival_probability(ctx: &PricingContext, maturity: f64) -> Result<f64> {
    let tau = ctx.horizon(maturity)?;
    Ok(ctx.physical()?.transform(&ctx.zero_arg(), tau, &ctx.x)?.re)
}

/// Zero-recovery defaultable zero-coupon bond.
pub fn defaultable_bond(ctx: &PricingContext, maturity: f64) -> Result<f64> {
    Ok(zero_recovery_value(ctx, maturity, &PayoffBundle::one(ctx.dim()))?.re)
}

/// Default-free zero-coupon bond.
pub fn riskfree_bond(ctx: &PricingContext, maturity: f64) -> Result<f64> {
    let tau = ctx.horizon(maturity)?;
    Ok(ctx.riskfree()?.transform(&ctx.zero_arg(), tau, &ctx.x)?.re)
}

/// Payoff `G(x) = sum_k c_k exp(z_k^T x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffBundle {
    pub terms: Vec<(C64, Vec<C64>)>,
}

impl PayoffBundle {
    pub fn one(d: usize) -> Self {
        Self::single(C64::new(1.0, 0.0), vec![C64::new(0.0, 0.0); d])
    }

    pub fn single(c: C64, z: Vec<C64>) -> Self {
        Self { terms: vec![(c, z)] }
    }

    pub fn plus(mut self, other: PayoffBundle) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn scaled(mut self, factor: C64) -> Self {
        for (c, _) in &mut self.terms {
            *c *= factor;
        }
        self
    }
}

/// Value of `G(X_T)` paid at `T` if no default occurs before `T`.
pub fn zero_recovery_value(ctx: &PricingContext, maturity: f64, payoff: &PayoffBundle) -> Result<C64> {
    let tau = ctx.horizon(maturity)?;
    let tr = ctx.risk_neutral()?;
    payoff
        .terms
        .iter()
        .try_fold(C64::new(0.0, 0.0), |acc, (c, z)| Ok(acc + c * tr.transform(z, tau, &ctx.x)?))
}

/// Result of a time integral over `[t, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeIntegral {
    pub value: C64,
    pub nodes: usize,
}

/// Absolute tolerance between successive refinements of the time quadrature.
pub const TIME_QUADRATURE_TOL: f64 = 1e-9;

/// Value of `G(X_tau)` paid at default if `tau <= T`.
pub fn pure_recovery_value(ctx: &PricingContext, maturity: f64, payoff: &PayoffBundle) -> Result<C64> {
    Ok(pure_recovery_integral(ctx, maturity, payoff, &[])?.value)
}

/// As [`pure_recovery_value`], with `breaks` as extra quadrature break points.
///
/// The inner expectation `E[exp(-int (r + lambda)) lambda_u G(X_u)]` equals
/// `lbar T(z) + D_Lambda T(z)`: one Riccati solve per payoff term, carrying the
/// sensitivity along `Lambda^Q`, serves every quadrature node through dense output.
pub fn pure_recovery_integral(
    ctx: &PricingContext,
    maturity: f64,
    payoff: &PayoffBundle,
    breaks: &[f64],
) -> Result<TimeIntegral> {
    let horizon = ctx.horizon(maturity)?;
    let lq = &ctx.q.lambda_q;
    if lq.is_identically_zero() || horizon == 0.0 {
        return Ok(TimeIntegral {
            value: C64::new(0.0, 0.0),
            nodes: 0,
        });
    }
    let num = NumericTransform::new(ctx.q.params.clone(), ctx.q.flavor(), ctx.q.rate.clone()).with_tolerance(ctx.tol);
    let direction: Vec<C64> = lq.vec.iter().map(|&v| C64::new(v, 0.0)).collect();
    let sols = payoff
        .terms
        .iter()
        .map(|(c, z)| Ok((*c, num.solve(z, horizon, std::slice::from_ref(&direction))?)))
        .collect::<Result<Vec<_>>>()?;
    let integrand = |s: f64| -> C64 {
        sols.iter()
            .map(|(c, sol)| c * (lq.bar * sol.transform(s, &ctx.x) + sol.transform_derivative(0, s, &ctx.x)))
            .sum()
    };

    // Break points relative to the valuation time.
    let mut knots: Vec<f64> = breaks
        .iter()
        .map(|&b| b - ctx.t)
        .filter(|&b| b > 0.0 && b < horizon)
        .collect();
    if knots.is_empty() {
        knots = (1..4).map(|i| horizon * i as f64 / 4.0).collect();
    }
    knots.insert(0, 0.0);
    knots.push(horizon);
    knots.dedup();

    let mut prev = composite_complex(&knots, &integrand);
    let mut nodes = 8 * (knots.len() - 1);
    for _ in 0..12 {
        knots = refine(&knots);
        let cur = composite_complex(&knots, &integrand);
        nodes += 8 * (knots.len() - 1);
        let done = (cur - prev).norm() < TIME_QUADRATURE_TOL;
        prev = cur;
        if done {
            break;
        }
    }
    Ok(TimeIntegral { value: prev, nodes })
}

fn refine(knots: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * knots.len());
    for w in knots.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*knots.last().unwrap());
    out
}

fn composite_complex<F: Fn(f64) -> C64>(knots: &[f64], f: &F) -> C64 {
    let r = rule(8);
    knots
        .windows(2)
        .map(|w| r.mapped(w[0], w[1]).map(|(x, wt)| wt * f(x)).sum::<C64>())
        .sum()
}

/// Premium payment dates `t_0 < t_1 < .. < t_N` and the fraction `delta` of
/// notional paid by the protection seller at default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdsSchedule {
    pub dates: Vec<f64>,
    pub delta: f64,
}

impl CdsSchedule {
    pub fn new(dates: Vec<f64>, delta: f64) -> Result<Self> {
        if dates.len() < 2 || dates.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("payment dates must be strictly increasing, at least two"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta = {delta} must lie in (0, 1)")));
        }
        Ok(Self { dates, delta })
    }

    /// Equally spaced payments `t0 + i / frequency` up to `t0 + years`.
    pub fn regular(t0: f64, years: f64, frequency: u32, delta: f64) -> Result<Self> {
        let n = (years * frequency as f64).round() as usize;
        Self::new((0..=n).map(|i| t0 + i as f64 / frequency as f64).collect(), delta)
    }

    pub fn maturity(&self) -> f64 {
        *self.dates.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdsQuote {
    pub spread: f64,
    /// `delta` times the value of one paid at default.
    pub protection_leg: f64,
    /// `sum (t_k - t_{k-1}) Pi(t, t_k)`
    pub premium_annuity: f64,
    pub quadrature_nodes: usize,
}

/// Fair spread of a CDS priced at the schedule's first date.
pub fn cds_quote(ctx: &PricingContext, schedule: &CdsSchedule) -> Result<CdsQuote> {
    if (schedule.dates[0] - ctx.t).abs() > 1e-12 {
        return Err(Error::invalid("the first payment date must equal the valuation time"));
    }
    let one = PayoffBundle::one(ctx.dim());
    let integral = pure_recovery_integral(ctx, schedule.maturity(), &one, &schedule.dates)?;
    let annuity = schedule
        .dates
        .windows(2)
        .map(|w| Ok((w[1] - w[0]) * defaultable_bond(ctx, w[1])?))
        .sum::<Result<f64>>()?;
    let protection = schedule.delta * integral.value.re;
    Ok(CdsQuote {
        spread: protection / annuity,
        protection_leg: protection,
        premium_annuity: annuity,
        quadrature_nodes: integral.nodes,
    })
}

pub fn cds_spread(ctx: &PricingContext, schedule: &CdsSchedule) -> Result<f64> {
    Ok(cds_quote(ctx, schedule)?.spread)
}

/// `C - P - S_t + K Pi_rf(t, T)`
pub fn parity_residual(
    ctx: &PricingContext,
    strike: f64,
    maturity: f64,
    damping: &crate::fourier::DampingConfig,
    cfg: &crate::quadrature::QuadratureConfig,
) -> Result<f64> {
    let c = crate::fourier::call_price(ctx, strike, maturity, damping, cfg)?.value;
    let p = crate::fourier::put_price(ctx, strike, maturity, damping, cfg)?.value;
    Ok(c - p - ctx.spot() + strike * riskfree_bond(ctx, maturity)?)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::affine::tests::heston_reference;

    /// Reference dynamics with constant intensity and rate.
    pub(crate) fn constant_hazard(lambda: f64, r: f64) -> PricingContext {
        let p = heston_reference();
        let lp = SpecAffine::constant(lambda, 3);
        let prem = RiskPremiumSpec::zero(&lp);
        PricingContext::new(p, lp, &prem, SpecAffine::constant(r, 3)).unwrap()
    }

    #[test]
    fn constant_hazard_survival_and_bonds() {
        let ctx = constant_hazard(0.1, 0.02);
        assert!((survival_probability(&ctx, 2.0).unwrap() - (-0.2f64).exp()).abs() < 1e-12);
        assert!((defaultable_bond(&ctx, 1.0).unwrap() - (-0.12f64).exp()).abs() < 1e-12);
        let ctx = constant_hazard(0.1, 0.03);
        assert!((riskfree_bond(&ctx, 2.0).unwrap() - (-0.06f64).exp()).abs() < 1e-12);
        let ctx = constant_hazard(0.1, 0.0);
        assert_eq!(riskfree_bond(&ctx, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn pure_recovery_constant_hazard() {
        let (l, r) = (0.02, 0.01);
        let ctx = constant_hazard(l, r);
        let v = pure_recovery_value(&ctx, 5.0, &PayoffBundle::one(3)).unwrap();
        let exact = l / (l + r) * (1.0 - (-(l + r) * 5.0f64).exp());
        assert!((v.re - exact).abs() < 1e-10, "{} vs {exact}", v.re);
    }

    #[test]
    fn constant_hazard_cds() {
        let (l, r, delta) = (0.02, 0.01, 0.6);
        let ctx = constant_hazard(l, r);
        let sched = CdsSchedule::regular(0.0, 5.0, 4, delta).unwrap();
        let q = cds_quote(&ctx, &sched).unwrap();
        let prot = delta * l / (l + r) * (1.0 - (-0.15f64).exp());
        let ann: f64 = (1..=20).map(|k| 0.25 * (-0.03 * k as f64 * 0.25).exp()).sum();
        assert!((q.protection_leg - prot).abs() < 1e-8);
        assert!((q.premium_annuity - ann).abs() < 1e-8);
        assert!((q.spread - prot / ann).abs() < 1e-8);
        let doubled = CdsSchedule::regular(0.0, 5.0, 4, 0.3).unwrap();
        let half = cds_spread(&ctx, &doubled).unwrap();
        assert!((q.spread / 0.6 - half / 0.3).abs() < 1e-15 * q.spread.max(1.0) * 10.0);
    }

    #[test]
    fn survival_ignores_log_price() {
        let h = HestonJtdParams::reference();
        let ctx = PricingContext::heston(&h, &HestonPremium::reference()).unwrap();
        let a = survival_probability(&ctx, 1.0).unwrap();
        let moved = ctx.clone().at(0.0, vec![0.07, 0.003, 0.4]).unwrap();
        assert_eq!(a, survival_probability(&moved, 1.0).unwrap());
        let num = ctx.clone().with_backend(Backend::Numeric);
        let b = survival_probability(&num, 1.0).unwrap();
        assert!((a - b).abs() < 1e-9);
        let moved = num.clone().at(0.0, vec![0.07, 0.003, 0.4]).unwrap();
        assert_eq!(b, survival_probability(&moved, 1.0).unwrap());
    }

    #[test]
    fn bond_ordering_and_decomposition() {
        let h = HestonJtdParams::reference();
        let ctx = PricingContext::heston(&h, &HestonPremium::reference()).unwrap();
        let mut prev = 1.0;
        for &t in &[0.5, 1.0, 2.0, 3.0] {
            let pi = defaultable_bond(&ctx, t).unwrap();
            let rf = riskfree_bond(&ctx, t).unwrap();
            assert!(0.0 < pi && pi <= rf && rf <= 1.0);
            let s = survival_probability(&ctx, t).unwrap();
            assert!(s <= prev);
            prev = s;
            // r = 0: survival plus default probability under Q.
            let d = pure_recovery_value(&ctx, t, &PayoffBundle::one(3)).unwrap().re;
            assert!((pi + d - 1.0).abs() < 1e-8, "t {t}: {}", pi + d);
        }
        let free = ctx.default_free();
        assert_eq!(defaultable_bond(&free, 2.0).unwrap(), riskfree_bond(&free, 2.0).unwrap());
        assert_eq!(pure_recovery_value(&free, 2.0, &PayoffBundle::one(3)).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_recovery_is_linear() {
        let h = HestonJtdParams::reference();
        let ctx = PricingContext::heston(&h, &HestonPremium::reference()).unwrap();
        let g1 = PayoffBundle::one(3);
        let g2 = PayoffBundle::single(C64::new(1.0, 0.0), ctx.log_price_arg(C64::new(1.0, 0.0)));
        let a = zero_recovery_value(&ctx, 1.0, &g1).unwrap();
        let b = zero_recovery_value(&ctx, 1.0, &g2).unwrap();
        let mix = g1.clone().scaled(C64::new(2.0, 0.0)).plus(g2.scaled(C64::new(-0.5, 0.0)));
        let m = zero_recovery_value(&ctx, 1.0, &mix).unwrap();
        assert!((m - (2.0 * a - 0.5 * b)).norm() < 1e-15);
        assert_eq!(a.re, defaultable_bond(&ctx, 1.0).unwrap());
        // Discounted pre-default stock with jump to default is a martingale.
        assert!((b.re - ctx.spot()).abs() < 1e-9, "{b}");
    }

    #[test]
    fn schedule_validation() {
        assert!(CdsSchedule::new(vec![0.0, 0.5, 0.5], 0.6).is_err());
        assert!(CdsSchedule::new(vec![0.0, 1.0], 1.0).is_err());
        assert_eq!(CdsSchedule::regular(0.0, 1.0, 4, 0.6).unwrap().dates, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
