//! Structure-preserving changes of measure.
//!
//! A premium `(thetahat, Theta, lambda^Q)` moves the drift to
//! `A^Q = A + Sigma Theta`, `b^Q = b + Sigma thetahat` and replaces the
//! intensity by `lambda^Q`. The diffusion part is untouched.

use serde::{Deserialize, Serialize};

use crate::affine::{
    stock_coefficients, validate_admissibility, AffineModelParams, Clause, SpecAffine, ValidationReport,
    Violation,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::riccati::{solve, MeasureFlavor, C64};

/// Market prices of diffusive risk `theta(x) = R(x)^{-1/2} (thetahat + Theta x)`
/// and the risk-neutral intensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskPremiumSpec {
    pub thetahat: Vec<f64>,
    #[serde(rename = "Theta")]
    pub theta: Matrix,
    #[serde(rename = "lambdaQ")]
    pub lambda_q: SpecAffine,
}

impl RiskPremiumSpec {
    /// No diffusive premium, same intensity.
    pub fn zero(lambda_p: &SpecAffine) -> Self {
        let d = lambda_p.vec.len();
        Self {
            thetahat: vec![0.0; d],
            theta: Matrix::zeros(d),
            lambda_q: lambda_p.clone(),
        }
    }
}

/// Risk-neutral model: parameters with `A^Q, b^Q`, intensity and short rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QModelParams {
    pub params: AffineModelParams,
    pub lambda_q: SpecAffine,
    pub rate: SpecAffine,
}

impl QModelParams {
    pub fn flavor(&self) -> MeasureFlavor {
        MeasureFlavor::risk_neutral(self.lambda_q.clone())
    }

    /// Default-free counterpart: the intensity is removed together with its
    /// compensator in the log-price drift, so the discounted stock stays a martingale.
    pub fn default_free(&self) -> Self {
        let d = self.params.d;
        let last = d - 1;
        let mut params = self.params.clone();
        params.b[last] -= self.lambda_q.bar;
        for j in 0..d {
            params.a[(last, j)] -= self.lambda_q.vec[j];
        }
        Self {
            params,
            lambda_q: SpecAffine::zero(d),
            rate: self.rate.clone(),
        }
    }
}

/// Conditions on a premium under which the changed measure keeps `(X, tau)` affine.
pub fn validate_premium(params: &AffineModelParams, p: &RiskPremiumSpec) -> Result<ValidationReport> {
    params.check_structure()?;
    let (d, m) = (params.d, params.m);
    if p.thetahat.len() != d || p.theta.dim() != d {
        return Err(Error::structural(format!("premium must be {d}-dimensional")));
    }
    let sig = &params.sigma;
    let st = sig.mul(&p.theta);
    let sth = sig.mul_vec(&p.thetahat);
    let mut report = ValidationReport::default();

    for i in 0..m {
        let rhs = sig[(i, i)].powi(2) * params.beta[(i, i)] / 2.0 - params.b[i];
        if sth[i] < rhs {
            report.violations.push(Violation::new(Clause::PremiumI, vec![i], sth[i], rhs));
        }
    }
    for i in 0..m {
        for j in m..d {
            if st[(i, j)] != 0.0 {
                report.violations.push(Violation::new(Clause::PremiumII, vec![i, j], st[(i, j)], 0.0));
            }
        }
        for j in (0..m).filter(|&j| j != i) {
            if st[(i, j)] < -params.a[(i, j)] {
                report
                    .violations
                    .push(Violation::new(Clause::PremiumII, vec![i, j], st[(i, j)], -params.a[(i, j)]));
            }
        }
    }
    report.extend(p.lambda_q.check(d, m, Clause::IntensityQ)?);
    Ok(report)
}

/// Applies the drift shift of the premium.
///
/// Fails with the violated clauses if the premium does not preserve the affine
/// structure; the resulting parameters are re-checked for admissibility.
pub fn apply_measure_change(
    params: &AffineModelParams,
    p: &RiskPremiumSpec,
    rate: &SpecAffine,
) -> Result<QModelParams> {
    validate_premium(params, p)?.into_result()?;
    let q = AffineModelParams {
        a: params.a.add(&params.sigma.mul(&p.theta)),
        b: params
            .b
            .iter()
            .zip(params.sigma.mul_vec(&p.thetahat))
            .map(|(b, s)| b + s)
            .collect(),
        ..params.clone()
    };
    validate_admissibility(&q)?.into_result()?;
    Ok(QModelParams {
        params: q,
        lambda_q: p.lambda_q.clone(),
        rate: rate.clone(),
    })
}

/// Residuals of the drift identity of the discounted pre-default stock,
/// matched coefficient by coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub constant: f64,
    /// One residual per state component; the last one is the `log S` channel.
    pub channels: Vec<f64>,
}

impl ResidualReport {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn max_abs(&self) -> f64 {
        self.channels
            .iter()
            .fold(self.constant.abs(), |acc, r| acc.max(r.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() < Self::TOLERANCE
    }

    /// Nonzero residuals as [`Clause::DriftCondition`] violations. The
    /// constant term carries no index.
    pub fn violations(&self, tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.constant.abs() >= tol {
            out.push(Violation::new(Clause::DriftCondition, vec![], self.constant, 0.0));
        }
        for (j, &r) in self.channels.iter().enumerate() {
            if r.abs() >= tol {
                out.push(Violation::new(Clause::DriftCondition, vec![j], r, 0.0));
            }
        }
        out
    }
}

/// Substitutes `theta(x)` into the drift identity
/// `stock drift + Sigma_{d,.} (thetahat + Theta x) = r(x) + lambda^Q(x)`.
///
/// Both sides are affine in the state. A nonzero `log S` residual means no
/// premium of this form can make the discounted stock a martingale with the
/// given drift matrix row.
pub fn verify_drift_condition(
    params: &AffineModelParams,
    p: &RiskPremiumSpec,
    rate: &SpecAffine,
    lambda_p: &SpecAffine,
) -> Result<ResidualReport> {
    params.check_structure()?;
    let d = params.d;
    for (name, len) in [
        ("thetahat", p.thetahat.len()),
        ("Theta", p.theta.dim()),
        ("rate", rate.vec.len()),
        ("intensity_P", lambda_p.vec.len()),
        ("intensity_Q", p.lambda_q.vec.len()),
    ] {
        if len != d {
            return Err(Error::structural(format!("{name} has dimension {len}, expected {d}")));
        }
    }
    let last = d - 1;
    let (sbar, lin) = stock_coefficients(params).drift_coefficients(d);
    let sth = params.sigma.mul_vec(&p.thetahat);
    let st = params.sigma.mul(&p.theta);
    let constant = sbar + sth[last] - rate.bar - p.lambda_q.bar;
    let channels = (0..d)
        .map(|j| lin[j] + st[(last, j)] - rate.vec[j] - p.lambda_q.vec[j])
        .collect();
    Ok(ResidualReport { constant, channels })
}

/// Market price of diffusive risk and relative jump premium at state `x`.
pub fn risk_premia_at(
    params: &AffineModelParams,
    p: &RiskPremiumSpec,
    lambda_p: &SpecAffine,
    x: &[f64],
) -> Result<(Vec<f64>, f64)> {
    params.check_structure()?;
    if !params.is_interior(x) {
        return Err(Error::invalid("risk premia are only defined at interior states"));
    }
    let r = crate::affine::diffusion_squared(params, x)?;
    let shift = p.theta.mul_vec(x);
    let theta = (0..params.d)
        .map(|i| (p.thetahat[i] + shift[i]) / r[i].sqrt())
        .collect();
    let lp = lambda_p.value(x);
    if lp <= 0.0 {
        return Err(Error::invalid("physical intensity vanishes at this state"));
    }
    let gamma = (p.lambda_q.value(x) - lp) / lp;
    Ok((theta, gamma))
}

/// Characteristic function of `X_T` under the `T`-survival measure of `P`.
pub fn survival_cf_p(
    params: &AffineModelParams,
    lambda_p: &SpecAffine,
    z: &[C64],
    t: f64,
    maturity: f64,
    x: &[f64],
) -> Result<C64> {
    let flavor = MeasureFlavor::physical(lambda_p.clone());
    let rate = SpecAffine::zero(params.d);
    survival_cf(params, &flavor, &rate, z, maturity - t, x)
}

/// Characteristic function of `X_u` under the `u`-survival risk-neutral measure.
pub fn survival_cf_q(q: &QModelParams, z: &[C64], t: f64, u: f64, x: &[f64]) -> Result<C64> {
    survival_cf(&q.params, &q.flavor(), &q.rate, z, u - t, x)
}

fn survival_cf(
    params: &AffineModelParams,
    flavor: &MeasureFlavor,
    rate: &SpecAffine,
    z: &[C64],
    tau: f64,
    x: &[f64],
) -> Result<C64> {
    if tau < 0.0 {
        return Err(Error::invalid("maturity precedes valuation time"));
    }
    let zero = vec![C64::new(0.0, 0.0); params.d];
    let (phi_z, psi_z) = solve(params, flavor, rate, z, tau)?.at(tau);
    let (phi_0, psi_0) = solve(params, flavor, rate, &zero, tau)?.at(tau);
    let e = phi_z - phi_0
        + psi_z
            .iter()
            .zip(&psi_0)
            .zip(x)
            .map(|((a, b), &xi)| (a - b) * xi)
            .sum::<C64>();
    Ok(e.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::tests::heston_reference;

    fn lambda_p() -> SpecAffine {
        SpecAffine::new(0.1225, vec![0.1225, 0.1225, 0.0])
    }

    /// Premium of the reference calibration with the option-scenario intensity.
    fn reference_premium() -> RiskPremiumSpec {
        let rho: f64 = -0.558;
        let c = (1.0 - rho * rho).sqrt();
        let lq = SpecAffine::new(0.001, vec![0.1225, 0.1225, 0.0]);
        RiskPremiumSpec {
            thetahat: vec![0.001, 0.001, (0.0 + 0.001 - 0.1 - rho * 0.001) / c],
            theta: Matrix::from_rows(&[
                vec![0.002, 0.0, 0.0],
                vec![0.0, 0.002, 0.0],
                vec![(0.1225 - rho * 0.002) / c, 0.1225 / c, 0.0],
            ])
            .unwrap(),
            lambda_q: lq,
        }
    }

    #[test]
    fn zero_premium_is_identity() {
        let p = heston_reference();
        let q = apply_measure_change(&p, &RiskPremiumSpec::zero(&lambda_p()), &SpecAffine::zero(3)).unwrap();
        assert_eq!(q.params, p);
        assert_eq!(q.lambda_q, lambda_p());
    }

    #[test]
    fn reference_premium_shifts_drift() {
        let p = heston_reference();
        let q = apply_measure_change(&p, &reference_premium(), &SpecAffine::zero(3)).unwrap();
        assert!((q.params.a[(0, 0)] + 0.564438).abs() < 1e-12);
        assert!((q.params.b[0] - 0.039831).abs() < 1e-12);
        assert!((q.params.a[(2, 0)] - (0.1225 - 0.5)).abs() < 1e-12);
        assert!((q.params.a[(2, 1)] - 0.1225).abs() < 1e-12);
        assert!((q.params.b[2] - 0.001).abs() < 1e-12);
    }

    #[test]
    fn premium_violations_name_the_clause() {
        let p = heston_reference();
        let mut prem = reference_premium();
        prem.thetahat[0] = -0.01;
        let err = apply_measure_change(&p, &prem, &SpecAffine::zero(3)).unwrap_err();
        assert!(matches!(err, Error::Rejected(ref r) if r.clauses() == vec![Clause::PremiumI]));

        let mut prem = reference_premium();
        prem.theta[(0, 2)] = 0.3;
        let rep = validate_premium(&p, &prem).unwrap();
        assert_eq!(rep.clauses(), vec![Clause::PremiumII]);
        assert_eq!(rep.violations[0].indices, vec![0, 2]);
    }

    #[test]
    fn drift_residuals_vanish_for_reference_premium() {
        let p = heston_reference();
        let rep = verify_drift_condition(&p, &reference_premium(), &SpecAffine::zero(3), &lambda_p()).unwrap();
        assert!(rep.is_zero(), "{rep:?}");
    }

    #[test]
    fn drift_residual_is_linear_in_thetahat() {
        let p = heston_reference();
        let c = (1.0 - 0.558f64 * 0.558).sqrt();
        for eps in [0.01, 0.02] {
            let mut prem = reference_premium();
            prem.thetahat[2] += eps;
            let rep = verify_drift_condition(&p, &prem, &SpecAffine::zero(3), &lambda_p()).unwrap();
            assert!((rep.constant - c * eps).abs() < 1e-14);
            assert!(rep.channels.iter().all(|r| r.abs() < 1e-14));
        }
    }

    #[test]
    fn zero_premium_needs_matching_intensity() {
        // With no diffusive premium the constant residual is mu - rbar - lbar^Q.
        let p = heston_reference();
        let lp = SpecAffine::new(0.1, vec![0.0; 3]);
        let rep = verify_drift_condition(&p, &RiskPremiumSpec::zero(&lp), &SpecAffine::zero(3), &lp).unwrap();
        assert!(rep.is_zero());
        let lp = SpecAffine::new(0.05, vec![0.0; 3]);
        let rep = verify_drift_condition(&p, &RiskPremiumSpec::zero(&lp), &SpecAffine::zero(3), &lp).unwrap();
        assert!((rep.constant - 0.05).abs() < 1e-15);
    }

    #[test]
    fn log_price_channel_can_be_cancelled_by_theta() {
        let mut p = heston_reference();
        p.a[(2, 2)] = -0.2;
        let mut prem = reference_premium();
        let rep = verify_drift_condition(&p, &prem, &SpecAffine::zero(3), &lambda_p()).unwrap();
        assert!((rep.channels[2] + 0.2).abs() < 1e-15);
        prem.theta[(2, 2)] = 0.2 / p.sigma[(2, 2)];
        let rep = verify_drift_condition(&p, &prem, &SpecAffine::zero(3), &lambda_p()).unwrap();
        assert!(rep.channels[2].abs() < 1e-15);
    }

    #[test]
    fn jump_premium_values() {
        let p = heston_reference();
        let lp = lambda_p();
        let x = p.x0.clone();
        let (_, g) = risk_premia_at(&p, &RiskPremiumSpec::zero(&lp), &lp, &x).unwrap();
        assert_eq!(g, 0.0);
        let doubled = RiskPremiumSpec {
            lambda_q: lp.scaled(2.0),
            ..RiskPremiumSpec::zero(&lp)
        };
        let (_, g) = risk_premia_at(&p, &doubled, &lp, &[0.3, 0.01, 1.0]).unwrap();
        assert!((g - 1.0).abs() < 1e-15);
        let (theta, g) = risk_premia_at(&p, &reference_premium(), &lp, &x).unwrap();
        // (0.0099425 - 0.1314425) / 0.1314425
        assert!((g - (0.0099425 - 0.1314425) / 0.1314425).abs() < 1e-14);
        assert!(g > -1.0);
        assert!((theta[0] - (0.001 + 0.002 * 0.07) / 0.07f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn survival_cf_normalization_and_constant_intensity() {
        let p = heston_reference();
        let zero = vec![C64::new(0.0, 0.0); 3];
        let v = survival_cf_p(&p, &lambda_p(), &zero, 0.0, 1.0, &p.x0).unwrap();
        assert!((v - 1.0).norm() < 1e-14);

        let z = vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0)];
        let lc = SpecAffine::constant(0.3, 3);
        let a = survival_cf_p(&p, &lc, &z, 0.0, 1.5, &p.x0).unwrap();
        let b = survival_cf_p(&p, &SpecAffine::zero(3), &z, 0.0, 1.5, &p.x0).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn survival_cf_q_ignores_constant_rate() {
        let p = heston_reference();
        let z = vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0)];
        let mut q = apply_measure_change(&p, &reference_premium(), &SpecAffine::zero(3)).unwrap();
        let a = survival_cf_q(&q, &z, 0.0, 1.0, &p.x0).unwrap();
        q.rate = SpecAffine::constant(0.05, 3);
        let b = survival_cf_q(&q, &z, 0.0, 1.0, &p.x0).unwrap();
        assert!((a - b).norm() < 1e-10);
        let conj = survival_cf_q(&q, &[z[0], z[1], -z[2]], 0.0, 1.0, &p.x0).unwrap();
        assert!((conj - a.conj()).norm() < 1e-12);
    }
}
