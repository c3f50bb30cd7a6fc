//! Heston model with jump to default and an auxiliary square-root factor.
//!
//! State `(v, Y, L)`:
//!
//! ```text
//! dv = k (vhat - v) dt + sigmabar sqrt(v) dW1
//! dY = k0 (yhat - Y) dt + sigma0 sqrt(Y) dW2
//! dL = (mu - v / 2) dt + sqrt(v) (rho dW1 + sqrt(1 - rho^2) dW3)
//! lambda^P = lbar^P + Lambda1^P v + Lambda2^P Y
//! ```
//!
//! Premia with `Theta_12 = Theta_21 = 0` keep this shape under the pricing
//! measure, and the Riccati system then decouples into two scalar Riccati
//! equations with `Psi_3 = z_3`.

use serde::{Deserialize, Serialize};

use crate::affine::{validate_admissibility, AffineModelParams, Clause, SpecAffine, ValidationReport, Violation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measures::{apply_measure_change, validate_premium, verify_drift_condition, QModelParams, RiskPremiumSpec};
use crate::riccati::{AffineTransform, MeasureFlavor, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonJtdParams {
    pub k: f64,
    pub vhat: f64,
    pub sigmabar: f64,
    pub k0: f64,
    pub yhat: f64,
    pub sigma0: f64,
    pub mu: f64,
    pub rho: f64,
    pub rbar: f64,
    /// `(lbar^P, Lambda1^P, Lambda2^P)`
    #[serde(rename = "lambdaP")]
    pub lambda_p: [f64; 3],
    /// Initial state `(v0, Y0, log S0)`.
    pub x0: [f64; 3],
}

impl HestonJtdParams {
    /// Calibrated reference set with `S0 = 1` and the factors at their long-run means.
    pub fn reference() -> Self {
        Self {
            k: 0.565,
            vhat: 0.07,
            sigmabar: 0.281,
            k0: 0.325,
            yhat: 0.003,
            sigma0: 0.036,
            mu: 0.1,
            rho: -0.558,
            rbar: 0.0,
            lambda_p: [0.1225, 0.1225, 0.1225],
            x0: [0.07, 0.003, 0.0],
        }
    }

    pub fn intensity_p(&self) -> SpecAffine {
        SpecAffine::new(self.lambda_p[0], vec![self.lambda_p[1], self.lambda_p[2], 0.0])
    }

    pub fn rate(&self) -> SpecAffine {
        SpecAffine::constant(self.rbar, 3)
    }

    /// Parameter bounds specific to this class.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let mut push = |c, idx: Vec<usize>, lhs, rhs| rep.violations.push(Violation::new(c, idx, lhs, rhs));
        let fields = [self.k, self.vhat, self.sigmabar, self.k0, self.yhat, self.sigma0, self.mu, self.rho, self.rbar];
        if fields.iter().chain(&self.lambda_p).chain(&self.x0).any(|v| !v.is_finite()) {
            push(Clause::InitialState, vec![], f64::NAN, 0.0);
        }
        if self.sigmabar <= 0.0 {
            push(Clause::HestonVolatility, vec![0], self.sigmabar, 0.0);
        }
        if self.sigma0 <= 0.0 {
            push(Clause::HestonVolatility, vec![1], self.sigma0, 0.0);
        }
        if self.k * self.vhat < self.sigmabar.powi(2) / 2.0 {
            push(Clause::HestonFellerV, vec![0], self.k * self.vhat, self.sigmabar.powi(2) / 2.0);
        }
        if self.k0 * self.yhat < self.sigma0.powi(2) / 2.0 {
            push(Clause::HestonFellerY, vec![1], self.k0 * self.yhat, self.sigma0.powi(2) / 2.0);
        }
        if self.rho.abs() > 1.0 {
            push(Clause::HestonCorrelation, vec![], self.rho, 1.0);
        }
        if self.rbar < 0.0 {
            push(Clause::AffineFunctional, vec![], self.rbar, 0.0);
        }
        for (i, &l) in self.lambda_p.iter().enumerate() {
            if l < 0.0 {
                push(Clause::AffineFunctional, vec![i], l, 0.0);
            }
        }
        rep
    }

    /// Affine parameters, physical intensity and short rate.
    pub fn to_affine(&self) -> Result<(AffineModelParams, SpecAffine, SpecAffine)> {
        self.validate().into_result()?;
        let (k, k0, rho) = (self.k, self.k0, self.rho);
        let params = AffineModelParams::new(
            2,
            Matrix::from_rows(&[vec![-k, 0.0, 0.0], vec![0.0, -k0, 0.0], vec![-0.5, 0.0, 0.0]])?,
            vec![k * self.vhat, k0 * self.yhat, self.mu],
            Matrix::from_rows(&[
                vec![self.sigmabar, 0.0, 0.0],
                vec![0.0, self.sigma0, 0.0],
                vec![rho, 0.0, (1.0 - rho * rho).sqrt()],
            ])?,
            vec![0.0; 3],
            Matrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]])?,
            self.x0.to_vec(),
        )?;
        validate_admissibility(&params)?.into_result()?;
        Ok((params, self.intensity_p(), self.rate()))
    }
}

/// Free part of a structure-preserving premium; `thetahat_3` and the last row
/// of `Theta` follow from the drift identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonPremium {
    pub theta1hat: f64,
    pub theta2hat: f64,
    #[serde(rename = "Theta11")]
    pub theta11: f64,
    #[serde(rename = "Theta22")]
    pub theta22: f64,
    /// `(lbar^Q, Lambda1^Q, Lambda2^Q)`
    #[serde(rename = "lambdaQ")]
    pub lambda_q: [f64; 3],
}

impl HestonPremium {
    /// Reference premium with the option-scenario risk-neutral intensity.
    pub fn reference() -> Self {
        Self {
            theta1hat: 0.001,
            theta2hat: 0.001,
            theta11: 0.002,
            theta22: 0.002,
            lambda_q: [0.001, 0.1225, 0.1225],
        }
    }

    pub fn intensity_q(&self) -> SpecAffine {
        SpecAffine::new(self.lambda_q[0], vec![self.lambda_q[1], self.lambda_q[2], 0.0])
    }

    /// Same premium with the risk-neutral intensity switched off.
    pub fn default_free(&self) -> Self {
        Self {
            lambda_q: [0.0; 3],
            ..self.clone()
        }
    }

    /// Full premium on the three Brownian motions.
    pub fn to_spec(&self, h: &HestonJtdParams) -> Result<RiskPremiumSpec> {
        let c = (1.0 - h.rho * h.rho).sqrt();
        if !(c > 0.0) {
            return Err(Error::DegenerateCorrelation);
        }
        let [lq, l1, l2] = self.lambda_q;
        Ok(RiskPremiumSpec {
            thetahat: vec![
                self.theta1hat,
                self.theta2hat,
                (h.rbar + lq - h.mu - h.rho * self.theta1hat) / c,
            ],
            theta: Matrix::from_rows(&[
                vec![self.theta11, 0.0, 0.0],
                vec![0.0, self.theta22, 0.0],
                vec![(l1 - h.rho * self.theta11) / c, l2 / c, 0.0],
            ])?,
            lambda_q: self.intensity_q(),
        })
    }
}

/// Checks that the premium keeps the Heston jump-to-default shape: the
/// `thetahat` bounds, the affine-preserving conditions of the assembled premium
/// and the drift identity.
pub fn validate_heston_preserving(h: &HestonJtdParams, p: &HestonPremium) -> Result<ValidationReport> {
    let mut rep = ValidationReport::default();
    let b1 = h.sigmabar / 2.0 - h.k * h.vhat / h.sigmabar;
    if p.theta1hat < b1 {
        rep.violations.push(Violation::new(Clause::HestonTheta1, vec![0], p.theta1hat, b1));
    }
    let b2 = h.sigma0 / 2.0 - h.k0 * h.yhat / h.sigma0;
    if p.theta2hat < b2 {
        rep.violations.push(Violation::new(Clause::HestonTheta2, vec![1], p.theta2hat, b2));
    }
    if h.rho * h.rho >= 1.0 {
        rep.violations.push(Violation::new(Clause::DegenerateCorrelation, vec![], h.rho, 1.0));
        return Ok(rep);
    }
    let (params, lambda_p, rate) = h.to_affine()?;
    let spec = p.to_spec(h)?;
    for v in validate_premium(&params, &spec)?.violations {
        // The thetahat bounds above are the same conditions in closed form.
        if v.clause != Clause::PremiumI {
            rep.violations.push(v);
        }
    }
    let residuals = verify_drift_condition(&params, &spec, &rate, &lambda_p)?;
    rep.extend(residuals.violations(1e-12));
    Ok(rep)
}

/// Risk-neutral model implied by a structure-preserving premium.
pub fn risk_neutral_model(h: &HestonJtdParams, p: &HestonPremium) -> Result<QModelParams> {
    validate_heston_preserving(h, p)?.into_result()?;
    let (params, _, rate) = h.to_affine()?;
    apply_measure_change(&params, &p.to_spec(h)?, &rate)
}

/// `(Phi(t, z), Psi(t, z))` of the risk-neutral system, in closed form.
pub fn closed_form_riccati(h: &HestonJtdParams, p: &HestonPremium, z: &[C64; 3], t: f64) -> Result<(C64, [C64; 3])> {
    let q = risk_neutral_model(h, p)?;
    let tr = HestonTransform::new(&q.params, &q.flavor(), &q.rate)?;
    let (phi, psi) = tr.coefficients(z, t)?;
    Ok((phi, [psi[0], psi[1], psi[2]]))
}

/// Closed-form [`AffineTransform`] for any parameter set with the Heston
/// jump-to-default sparsity pattern, under either measure.
#[derive(Clone, Debug, PartialEq)]
pub struct HestonTransform {
    sigmabar: f64,
    sigma0: f64,
    rho: f64,
    a11: f64,
    a22: f64,
    a31: f64,
    a32: f64,
    b: [f64; 3],
    kill_bar: f64,
    kill1: f64,
    kill2: f64,
}

impl HestonTransform {
    pub fn new(params: &AffineModelParams, flavor: &MeasureFlavor, rate: &SpecAffine) -> Result<Self> {
        params.check_structure()?;
        if params.d != 3 || params.m != 2 {
            return Err(Error::structural("closed form needs d = 3, m = 2"));
        }
        let (a, s, beta) = (&params.a, &params.sigma, &params.beta);
        let pattern_ok = a[(0, 1)] == 0.0
            && a[(0, 2)] == 0.0
            && a[(1, 0)] == 0.0
            && a[(1, 2)] == 0.0
            && a[(2, 2)] == 0.0
            && s[(0, 1)] == 0.0
            && s[(0, 2)] == 0.0
            && s[(1, 0)] == 0.0
            && s[(1, 2)] == 0.0
            && s[(2, 1)] == 0.0
            && params.alpha.iter().all(|&v| v == 0.0)
            && beta.to_rows() == vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]]
            && (s[(2, 0)].powi(2) + s[(2, 2)].powi(2) - 1.0).abs() < 1e-14
            && s[(0, 0)] > 0.0
            && s[(1, 1)] > 0.0;
        if !pattern_ok {
            return Err(Error::structural("parameters do not have the Heston jump-to-default shape"));
        }
        let kill = if flavor.discount_rate {
            flavor.intensity.plus(rate)
        } else {
            flavor.intensity.clone()
        };
        if kill.vec[2] != 0.0 {
            return Err(Error::structural("killing rate may not load on the log price"));
        }
        Ok(Self {
            sigmabar: s[(0, 0)],
            sigma0: s[(1, 1)],
            rho: s[(2, 0)],
            a11: a[(0, 0)],
            a22: a[(1, 1)],
            a31: a[(2, 0)],
            a32: a[(2, 1)],
            b: [params.b[0], params.b[1], params.b[2]],
            kill_bar: kill.bar,
            kill1: kill.vec[0],
            kill2: kill.vec[1],
        })
    }

    pub fn coefficients3(&self, z: &[C64], t: f64) -> (C64, [C64; 3]) {
        let z3 = z[2];
        let v = ScalarRiccati {
            s2: self.sigmabar * self.sigmabar,
            beta: self.a11 + self.sigmabar * self.rho * z3,
            c: self.a31 * z3 + 0.5 * z3 * z3 - self.kill1,
        };
        let y = ScalarRiccati {
            s2: self.sigma0 * self.sigma0,
            beta: C64::new(self.a22, 0.0),
            c: self.a32 * z3 - self.kill2,
        };
        let (psi1, int1) = v.solve(z[0], t);
        let (psi2, int2) = y.solve(z[1], t);
        let phi = self.b[0] * int1 + self.b[1] * int2 + (self.b[2] * z3 - self.kill_bar) * t;
        (phi, [psi1, psi2, z3])
    }
}

impl AffineTransform for HestonTransform {
    fn dim(&self) -> usize {
        3
    }

    fn coefficients(&self, z: &[C64], t: f64) -> Result<(C64, Vec<C64>)> {
        if z.len() != 3 {
            return Err(Error::structural("transform argument must have 3 components"));
        }
        let (phi, psi) = self.coefficients3(z, t);
        if !(phi.re.is_finite() && phi.im.is_finite() && psi.iter().all(|p| p.re.is_finite() && p.im.is_finite())) {
            return Err(Error::MomentExplosion { time: t });
        }
        Ok((phi, psi.to_vec()))
    }
}

/// `psi' = s2 psi^2 / 2 + beta psi + c`, `psi(0) = z`.
struct ScalarRiccati {
    s2: f64,
    beta: C64,
    c: C64,
}

impl ScalarRiccati {
    /// `(1 - e^{-x}) / x` and `1 + e^{-x}` at `x = dq t`.
    fn kernels(dq: C64, t: f64) -> (C64, C64) {
        let x = dq * t;
        let em = (-x).exp();
        let g = if x.norm() < 0.1 {
            // Taylor series of (1 - e^{-x}) / x.
            let mut term = C64::new(1.0, 0.0);
            let mut sum = term;
            for n in 1..12 {
                term *= -x / (n as f64 + 1.0);
                sum += term;
            }
            sum
        } else {
            (1.0 - em) / x
        };
        (g, 1.0 + em)
    }

    fn denominator(&self, dq: C64, z: C64, t: f64) -> C64 {
        let (g, g0) = Self::kernels(dq, t);
        g0 - (self.beta + self.s2 * z) * t * g
    }

    /// `(psi(t), int_0^t psi)`.
    ///
    /// Written with `e^{-dq t}`, `Re dq >= 0`, so nothing overflows, and the
    /// logarithm of the denominator is followed continuously from `t = 0`.
    fn solve(&self, z: C64, t: f64) -> (C64, C64) {
        if t == 0.0 {
            return (z, C64::new(0.0, 0.0));
        }
        let dq = (self.beta * self.beta - 2.0 * self.s2 * self.c).sqrt();
        let (g, g0) = Self::kernels(dq, t);
        let den = g0 - (self.beta + self.s2 * z) * t * g;
        let psi = (2.0 * self.c * t * g + (g0 + self.beta * t * g) * z) / den;
        let log_den = self.continuous_log(dq, z, t, den);
        let integral = (2.0 / self.s2) * (C64::new(2.0f64.ln(), 0.0) - log_den - (dq + self.beta) * t / 2.0);
        (psi, integral)
    }

    /// Logarithm of the denominator on the branch that starts at `log 2`.
    fn continuous_log(&self, dq: C64, z: C64, t: f64, den_t: C64) -> C64 {
        let mut n = 4usize;
        loop {
            let mut prev = C64::new(2.0, 0.0);
            let mut phase = 0.0;
            let mut ok = true;
            for j in 1..=n {
                let cur = if j == n {
                    den_t
                } else {
                    self.denominator(dq, z, t * j as f64 / n as f64)
                };
                let step = (cur / prev).arg();
                if step.abs() >= std::f64::consts::FRAC_PI_2 {
                    ok = false;
                    break;
                }
                phase += step;
                prev = cur;
            }
            if ok || n >= 1 << 14 {
                return C64::new(den_t.norm().ln(), phase);
            }
            n *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{solve, NumericTransform};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn reference_matrices() {
        let (p, lp, r) = HestonJtdParams::reference().to_affine().unwrap();
        assert_eq!(p.a.to_rows(), vec![vec![-0.565, 0.0, 0.0], vec![0.0, -0.325, 0.0], vec![-0.5, 0.0, 0.0]]);
        assert_eq!(p.b, vec![0.565 * 0.07, 0.325 * 0.003, 0.1]);
        assert_eq!(p.sigma.row(2), &[-0.558, 0.0, (1.0 - 0.558f64 * 0.558).sqrt()]);
        assert_eq!(lp.vec, vec![0.1225, 0.1225, 0.0]);
        assert!(r.is_identically_zero());
    }

    #[test]
    fn correlation_edge_cases() {
        let mut h = HestonJtdParams::reference();
        h.rho = 0.0;
        let (p, _, _) = h.to_affine().unwrap();
        assert_eq!(p.sigma[(2, 2)], 1.0);
        h.rho = -1.0;
        let (p, _, _) = h.to_affine().unwrap();
        assert_eq!(p.sigma[(2, 2)], 0.0);
        let rep = validate_heston_preserving(&h, &HestonPremium::reference()).unwrap();
        assert!(rep.has(Clause::DegenerateCorrelation));
        assert!(matches!(HestonPremium::reference().to_spec(&h), Err(Error::DegenerateCorrelation)));
    }

    #[test]
    fn reference_premium_is_structure_preserving() {
        let h = HestonJtdParams::reference();
        let rep = validate_heston_preserving(&h, &HestonPremium::reference()).unwrap();
        assert!(rep.is_ok(), "{rep}");
        let bound: f64 = 0.281 / 2.0 - 0.565 * 0.07 / 0.281;
        assert!((bound + 0.00025).abs() < 1e-5);

        let mut p = HestonPremium::reference();
        p.theta1hat = -0.01;
        let rep = validate_heston_preserving(&h, &p).unwrap();
        assert_eq!(rep.clauses(), vec![Clause::HestonTheta1]);
    }

    #[test]
    fn zero_diffusive_premium_requires_intensity_to_match_drift() {
        let mut h = HestonJtdParams::reference();
        h.lambda_p = [0.1, 0.0, 0.0];
        let zero = HestonPremium {
            theta1hat: 0.0,
            theta2hat: 0.0,
            theta11: 0.0,
            theta22: 0.0,
            lambda_q: [0.1, 0.0, 0.0],
        };
        let spec = zero.to_spec(&h).unwrap();
        assert!(spec.thetahat.iter().all(|&v| v.abs() < 1e-15));
        assert!(validate_heston_preserving(&h, &zero).unwrap().is_ok());
    }

    #[test]
    fn zero_argument_constant_intensity() {
        let h = HestonJtdParams::reference();
        let p = HestonPremium {
            lambda_q: [0.1, 0.0, 0.0],
            ..HestonPremium::reference()
        };
        for &t in &[0.0, 0.5, 3.0] {
            let (phi, psi) = closed_form_riccati(&h, &p, &[c(0.0, 0.0); 3], t).unwrap();
            assert!((phi - c(-0.1 * t, 0.0)).norm() < 1e-14);
            assert!(psi.iter().all(|v| v.norm() < 1e-15));
        }
    }

    #[test]
    fn closed_form_matches_numerical_solution() {
        let h = HestonJtdParams::reference();
        let p = HestonPremium::reference();
        let q = risk_neutral_model(&h, &p).unwrap();
        for &y in &[0.5, 1.0, 2.0] {
            let z = [c(0.0, 0.0), c(0.0, 0.0), c(0.0, y)];
            let sol = solve(&q.params, &q.flavor(), &q.rate, &z, 3.0).unwrap();
            for &t in &[0.5, 1.75, 3.0] {
                let (phi, psi) = closed_form_riccati(&h, &p, &z, t).unwrap();
                let (nphi, npsi) = sol.at(t);
                assert!((phi - nphi).norm() < 1e-7, "y {y} t {t}: {phi} vs {nphi}");
                for i in 0..3 {
                    assert!((psi[i] - npsi[i]).norm() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn physical_flavor_matches_numerical_solution() {
        let (params, lp, rate) = HestonJtdParams::reference().to_affine().unwrap();
        let flavor = MeasureFlavor::physical(lp);
        let tr = HestonTransform::new(&params, &flavor, &rate).unwrap();
        let num = NumericTransform::new(params, flavor, rate);
        let z = [c(-0.5, 3.0), c(-1.0, -2.0), c(0.0, -4.0)];
        let (a, pa) = tr.coefficients(&z, 2.0).unwrap();
        let (b, pb) = num.coefficients(&z, 2.0).unwrap();
        assert!((a - b).norm() < 1e-7);
        assert!(pa.iter().zip(&pb).all(|(x, y)| (x - y).norm() < 1e-7));
    }

    #[test]
    fn log_is_continuous_for_large_frequencies() {
        // Large |z3| makes the denominator wind around the origin.
        let h = HestonJtdParams::reference();
        let p = HestonPremium::reference();
        let q = risk_neutral_model(&h, &p).unwrap();
        let z = [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 40.0)];
        let sol = solve(&q.params, &q.flavor(), &q.rate, &z, 3.0).unwrap();
        let (phi, _) = closed_form_riccati(&h, &p, &z, 3.0).unwrap();
        assert!((phi - sol.at(3.0).0).norm() < 1e-6, "{phi} vs {:?}", sol.at(3.0).0);
        let (a, _) = closed_form_riccati(&h, &p, &z, 1.0).unwrap();
        let (b, _) = closed_form_riccati(&h, &p, &z, 1.0 + 1e-6).unwrap();
        assert!((a - b).norm() < 1e-4);
    }

    #[test]
    fn degenerate_discriminant_uses_series() {
        let r = ScalarRiccati {
            s2: 0.5,
            beta: c(-1.0, 0.0),
            c: c(1.0, 0.0),
        };
        // beta^2 - 2 s2 c = 0: psi' = (psi - 2)^2 / 4.
        let z = c(-0.5, 0.0);
        let (psi, _) = r.solve(z, 2.0);
        let exact = 2.0 + 4.0 / (4.0 / (z - 2.0) - 2.0);
        assert!((psi - exact).norm() < 1e-12, "{psi} vs {exact}");
    }
}
