//! Affine factor model for a defaultable stock.
//!
//! The state is `X = (v, Y_1, .., Y_{d-2}, L)` where `v` is the stochastic
//! variance, `Y` are auxiliary factors and `L = log S~` is the log pre-default
//! price. The first `m` components are strictly positive square-root factors
//! and the remaining `d - m` are real valued. `X` solves
//!
//! ```text
//! dX = (A X + b) dt + Sigma sqrt(R(X)) dW,    R_kk(x) = alpha_k + sum_i beta_{i,k} x_i
//! ```
//!
//! All indices in this crate are zero based; [`ValidationReport`] renders
//! them one based so that messages line up with the usual clause statements.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Parameters of the affine diffusion together with the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineModelParams {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Matrix,
    pub b: Vec<f64>,
    #[serde(rename = "Sigma")]
    pub sigma: Matrix,
    pub alpha: Vec<f64>,
    pub beta: Matrix,
    pub x0: Vec<f64>,
}

impl AffineModelParams {
    /// Builds a parameter set after checking shapes only. Admissibility is a
    /// separate question answered by [`validate_admissibility`].
    pub fn new(
        m: usize,
        a: Matrix,
        b: Vec<f64>,
        sigma: Matrix,
        alpha: Vec<f64>,
        beta: Matrix,
        x0: Vec<f64>,
    ) -> Result<Self> {
        let params = Self {
            d: a.dim(),
            m,
            a,
            b,
            sigma,
            alpha,
            beta,
            x0,
        };
        params.check_structure()?;
        Ok(params)
    }

    pub fn check_structure(&self) -> Result<()> {
        let d = self.d;
        if d < 2 {
            return Err(Error::structural(format!("dimension d = {d} must be at least 2")));
        }
        if self.m < 1 || self.m > d - 1 {
            return Err(Error::structural(format!(
                "m = {} must lie in 1..={}",
                self.m,
                d - 1
            )));
        }
        for (name, dim) in [
            ("A", self.a.dim()),
            ("Sigma", self.sigma.dim()),
            ("beta", self.beta.dim()),
        ] {
            if dim != d {
                return Err(Error::structural(format!("{name} is {dim}x{dim}, expected {d}x{d}")));
            }
        }
        for (name, len) in [
            ("b", self.b.len()),
            ("alpha", self.alpha.len()),
            ("x0", self.x0.len()),
        ] {
            if len != d {
                return Err(Error::structural(format!("{name} has length {len}, expected {d}")));
            }
        }
        Ok(())
    }

    /// Indices of the square-root (strictly positive) components.
    pub fn positive_block(&self) -> std::ops::Range<usize> {
        0..self.m
    }

    /// Indices of the real-valued components, the last one being `L`.
    pub fn real_block(&self) -> std::ops::Range<usize> {
        self.m..self.d
    }

    pub fn is_interior(&self, x: &[f64]) -> bool {
        x[..self.m].iter().all(|&v| v > 0.0)
    }

    pub fn log_price_index(&self) -> usize {
        self.d - 1
    }

    /// Same parameters started from another state.
    pub fn with_state(&self, x: Vec<f64>) -> Self {
        Self { x0: x, ..self.clone() }
    }
}

/// Affine functional `x -> cbar + C^T x`, used for intensities and short rates.
///
/// `C` may only load on the square-root block and all coefficients are
/// nonnegative, which keeps the functional nonnegative on the state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecAffine {
    pub bar: f64,
    pub vec: Vec<f64>,
}

impl SpecAffine {
    pub fn new(bar: f64, vec: Vec<f64>) -> Self {
        Self { bar, vec }
    }

    pub fn constant(bar: f64, d: usize) -> Self {
        Self {
            bar,
            vec: vec![0.0; d],
        }
    }

    pub fn zero(d: usize) -> Self {
        Self::constant(0.0, d)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.bar + dot(&self.vec, x)
    }

    /// Identically zero functionals describe default-free (or zero-rate) cases.
    pub fn is_identically_zero(&self) -> bool {
        self.bar == 0.0 && self.vec.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            bar: self.bar * factor,
            vec: self.vec.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn plus(&self, other: &SpecAffine) -> Self {
        Self {
            bar: self.bar + other.bar,
            vec: self.vec.iter().zip(&other.vec).map(|(a, b)| a + b).collect(),
        }
    }

    /// Violations of the sign and support constraints.
    ///
    /// Nonnegativity forces `cbar + sum_i C_i >= 0`; equality only happens for
    /// the identically zero functional, which is accepted as the default-free
    /// (respectively zero-rate) reduction.
    pub fn check(&self, d: usize, m: usize, clause: Clause) -> Result<Vec<Violation>> {
        if self.vec.len() != d {
            return Err(Error::structural(format!(
                "affine functional has {} coefficients, expected {d}",
                self.vec.len()
            )));
        }
        let mut out = Vec::new();
        if self.bar < 0.0 || !self.bar.is_finite() {
            out.push(Violation::new(clause, vec![], self.bar, 0.0));
        }
        for (i, &c) in self.vec.iter().enumerate() {
            if i < m {
                if c < 0.0 || !c.is_finite() {
                    out.push(Violation::new(clause, vec![i], c, 0.0));
                }
            } else if c != 0.0 {
                out.push(Violation::new(clause, vec![i], c, 0.0));
            }
        }
        Ok(out)
    }
}

/// Identifies which condition a [`Violation`] refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    /// `b_i >= Sigma_ii^2 beta_ii / 2` on the square-root block.
    AdmissibilityI,
    /// No drift feedback from real to square-root components; nonnegative cross terms.
    AdmissibilityII,
    /// Square-root rows of `Sigma` are diagonal.
    AdmissibilityIII,
    /// Shape and sign of `beta`.
    AdmissibilityIV,
    /// `alpha_i = 0` on the square-root block; lower bound on the real block.
    AdmissibilityV,
    /// Initial state outside `R^m_{++} x R^{d-m}`.
    InitialState,
    /// Sign/support constraint of an intensity or rate functional.
    AffineFunctional,
    /// Premium condition (i): `(Sigma thetahat)_i >= Sigma_ii^2 beta_ii / 2 - b_i`.
    PremiumI,
    /// Premium condition (ii): no new feedback into the square-root block.
    PremiumII,
    /// Risk-neutral intensity functional.
    IntensityQ,
    /// Lower bound on `thetahat_1` for the Heston jump-to-default class.
    HestonTheta1,
    /// Lower bound on `thetahat_2` for the Heston jump-to-default class.
    HestonTheta2,
    /// `k vhat >= sigmabar^2 / 2`.
    HestonFellerV,
    /// `k0 yhat >= sigma0^2 / 2`.
    HestonFellerY,
    /// `rho` outside `[-1, 1]`.
    HestonCorrelation,
    /// Vanishing or negative volatility-of-variance parameters.
    HestonVolatility,
    /// `rho^2 = 1`: the closed-form premium divides by `sqrt(1 - rho^2)`.
    DegenerateCorrelation,
    /// A residual of the drift identity for the discounted stock is nonzero.
    DriftCondition,
}

impl Clause {
    pub fn label(&self) -> &'static str {
        match self {
            Clause::AdmissibilityI => "(i)",
            Clause::AdmissibilityII => "(ii)",
            Clause::AdmissibilityIII => "(iii)",
            Clause::AdmissibilityIV => "(iv)",
            Clause::AdmissibilityV => "(v)",
            Clause::InitialState => "initial state",
            Clause::AffineFunctional => "affine functional",
            Clause::PremiumI => "premium (i)",
            Clause::PremiumII => "premium (ii)",
            Clause::IntensityQ => "risk-neutral intensity",
            Clause::HestonTheta1 => "thetahat_1 bound",
            Clause::HestonTheta2 => "thetahat_2 bound",
            Clause::HestonFellerV => "variance Feller bound",
            Clause::HestonFellerY => "factor Feller bound",
            Clause::HestonCorrelation => "correlation range",
            Clause::HestonVolatility => "volatility parameters",
            Clause::DegenerateCorrelation => "degenerate correlation, premium not representable",
            Clause::DriftCondition => "drift condition",
        }
    }
}

/// One failed condition: `lhs` should have satisfied the clause's relation to `rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub clause: Clause,
    /// Zero-based indices the condition refers to.
    pub indices: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

impl Violation {
    pub fn new(clause: Clause, indices: Vec<usize>, lhs: f64, rhs: f64) -> Self {
        Self {
            clause,
            indices,
            lhs,
            rhs,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause {}", self.clause.label())?;
        if !self.indices.is_empty() {
            let idx: Vec<String> = self.indices.iter().map(|i| (i + 1).to_string()).collect();
            write!(f, " at ({})", idx.join(","))?;
        }
        write!(f, ": lhs = {:.6e}, bound = {:.6e}", self.lhs, self.rhs)
    }
}

/// Machine-readable list of violated conditions. Empty means accepted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, clause: Clause) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }

    /// Distinct clauses in order of first appearance.
    pub fn clauses(&self) -> Vec<Clause> {
        let mut out = Vec::new();
        for v in &self.violations {
            if !out.contains(&v.clause) {
                out.push(v.clause);
            }
        }
        out
    }

    pub fn extend(&mut self, vs: impl IntoIterator<Item = Violation>) {
        self.violations.extend(vs);
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Rejected(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "admissible");
        }
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Checks the admissibility conditions with zero slack.
pub fn validate_admissibility(params: &AffineModelParams) -> Result<ValidationReport> {
    validate_admissibility_with_slack(params, 0.0)
}

/// Checks the admissibility conditions; non-strict inequalities are relaxed by `slack`.
pub fn validate_admissibility_with_slack(
    params: &AffineModelParams,
    slack: f64,
) -> Result<ValidationReport> {
    params.check_structure()?;
    let (d, m) = (params.d, params.m);
    let (a, sig, beta) = (&params.a, &params.sigma, &params.beta);
    let mut report = ValidationReport::default();
    let mut push = |c, idx: Vec<usize>, lhs, rhs| report.violations.push(Violation::new(c, idx, lhs, rhs));

    for i in 0..m {
        let rhs = sig[(i, i)].powi(2) * beta[(i, i)] / 2.0;
        if params.b[i] < rhs - slack {
            push(Clause::AdmissibilityI, vec![i], params.b[i], rhs);
        }
    }

    for i in 0..m {
        for j in m..d {
            if a[(i, j)] != 0.0 {
                push(Clause::AdmissibilityII, vec![i, j], a[(i, j)], 0.0);
            }
        }
        for j in 0..m {
            if i != j && a[(i, j)] < -slack {
                push(Clause::AdmissibilityII, vec![i, j], a[(i, j)], 0.0);
            }
        }
    }

    for i in 0..m {
        for j in 0..d {
            if j != i && sig[(i, j)] != 0.0 {
                push(Clause::AdmissibilityIII, vec![i, j], sig[(i, j)], 0.0);
            }
        }
    }

    for j in m..d {
        for i in 0..d {
            if beta[(j, i)] != 0.0 {
                push(Clause::AdmissibilityIV, vec![j, i], beta[(j, i)], 0.0);
            }
        }
    }
    for i in 0..m {
        if beta[(i, i)] <= 0.0 {
            push(Clause::AdmissibilityIV, vec![i, i], beta[(i, i)], 0.0);
        }
        for j in (0..d).filter(|&j| j != i) {
            let off_block = j < m && beta[(i, j)] != 0.0;
            if off_block || beta[(i, j)] < 0.0 {
                push(Clause::AdmissibilityIV, vec![i, j], beta[(i, j)], 0.0);
            }
        }
    }

    for i in 0..m {
        if params.alpha[i] != 0.0 {
            push(Clause::AdmissibilityV, vec![i], params.alpha[i], 0.0);
        }
    }
    for j in m..d {
        let bound = -(0..m).map(|i| beta[(i, j)]).sum::<f64>();
        if params.alpha[j] <= bound {
            push(Clause::AdmissibilityV, vec![j], params.alpha[j], bound);
        }
    }

    for i in 0..m {
        if params.x0[i] <= 0.0 {
            push(Clause::InitialState, vec![i], params.x0[i], 0.0);
        }
    }
    if params.x0.iter().any(|v| !v.is_finite()) {
        push(Clause::InitialState, vec![], f64::NAN, 0.0);
    }
    Ok(report)
}

/// `A x + b`
pub fn drift(params: &AffineModelParams, x: &[f64]) -> Vec<f64> {
    params
        .a
        .mul_vec(x)
        .into_iter()
        .zip(&params.b)
        .map(|(ax, b)| ax + b)
        .collect()
}

/// Diagonal of `R(x)` without any sign check.
pub(crate) fn diffusion_squared_raw(params: &AffineModelParams, x: &[f64]) -> Vec<f64> {
    let (d, m) = (params.d, params.m);
    (0..d)
        .map(|k| params.alpha[k] + (0..m).map(|i| params.beta[(i, k)] * x[i]).sum::<f64>())
        .collect()
}

/// Diagonal of `R(x)`, i.e. `alpha_k + beta_k^T x`.
///
/// For interior `x` every entry must be positive; a nonpositive entry means
/// the parameters are not admissible and is reported as such.
pub fn diffusion_squared(params: &AffineModelParams, x: &[f64]) -> Result<Vec<f64>> {
    let r = diffusion_squared_raw(params, x);
    if params.is_interior(x) {
        let bad: Vec<Violation> = r
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= 0.0)
            .map(|(k, &v)| Violation::new(Clause::AdmissibilityV, vec![k], v, 0.0))
            .collect();
        if !bad.is_empty() {
            return Err(Error::Rejected(ValidationReport { violations: bad }));
        }
    }
    Ok(r)
}

/// Coefficients of the pre-default stock dynamics
/// `dS/S = (sbar + mu1 L + mu2 v + sum eta_i Y_i + sum etabar_i Y_i) dt + ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StockCoefficients {
    pub sbar: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Loadings of `Y_1..Y_{d-2}` coming from the drift matrix.
    pub eta: Vec<f64>,
    /// Loadings of the positive factors `Y_1..Y_{m-1}` coming from the Ito correction.
    pub etabar: Vec<f64>,
    /// Loading of `sqrt(v) dW^1`.
    pub sigma: f64,
}

impl StockCoefficients {
    /// Instantaneous expected return of the pre-default price at state `x`.
    pub fn drift_at(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut s = self.sbar + self.mu1 * x[d - 1] + self.mu2 * x[0];
        for (i, e) in self.eta.iter().enumerate() {
            s += e * x[i + 1];
        }
        for (i, e) in self.etabar.iter().enumerate() {
            s += e * x[i + 1];
        }
        s
    }

    /// The same drift split into a constant and one coefficient per state component.
    pub fn drift_coefficients(&self, d: usize) -> (f64, Vec<f64>) {
        let mut lin = vec![0.0; d];
        lin[0] += self.mu2;
        lin[d - 1] += self.mu1;
        for (i, e) in self.eta.iter().enumerate() {
            lin[i + 1] += e;
        }
        for (i, e) in self.etabar.iter().enumerate() {
            lin[i + 1] += e;
        }
        (self.sbar, lin)
    }
}

pub fn stock_coefficients(params: &AffineModelParams) -> StockCoefficients {
    let (d, m) = (params.d, params.m);
    let last = d - 1;
    let (a, sig, beta, alpha) = (&params.a, &params.sigma, &params.beta, &params.alpha);
    let sd2 = |k: usize| sig[(last, k)].powi(2);

    let sbar = params.b[last] + 0.5 * (m..d).map(|k| sd2(k) * alpha[k]).sum::<f64>();
    let mu1 = a[(last, last)];
    let mu2 = a[(last, 0)]
        + 0.5 * sd2(0) * beta[(0, 0)]
        + 0.5 * (m..d).map(|k| sd2(k) * beta[(0, k)]).sum::<f64>();
    let eta = (1..d - 1).map(|i| a[(last, i)]).collect();
    let etabar = (1..m)
        .map(|i| 0.5 * sd2(i) * beta[(i, i)] + 0.5 * (m..d).map(|k| sd2(k) * beta[(i, k)]).sum::<f64>())
        .collect();
    let sigma = sig[(last, 0)] * beta[(0, 0)].sqrt();
    StockCoefficients {
        sbar,
        mu1,
        mu2,
        eta,
        etabar,
        sigma,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Heston jump-to-default matrices at the reference calibration, built by hand.
    pub(crate) fn heston_reference() -> AffineModelParams {
        let (k, vhat, sb, k0, yhat, s0, mu, rho) =
            (0.565, 0.07, 0.281, 0.325, 0.003, 0.036, 0.1, -0.558_f64);
        AffineModelParams::new(
            2,
            Matrix::from_rows(&[vec![-k, 0.0, 0.0], vec![0.0, -k0, 0.0], vec![-0.5, 0.0, 0.0]]).unwrap(),
            vec![k * vhat, k0 * yhat, mu],
            Matrix::from_rows(&[
                vec![sb, 0.0, 0.0],
                vec![0.0, s0, 0.0],
                vec![rho, 0.0, (1.0 - rho * rho).sqrt()],
            ])
            .unwrap(),
            vec![0.0; 3],
            Matrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap(),
            vec![0.07, 0.003, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn reference_heston_is_admissible() {
        let p = heston_reference();
        let rep = validate_admissibility(&p).unwrap();
        assert!(rep.is_ok(), "{rep}");
        // k vhat = 0.03955 >= sigmabar^2 / 2 = 0.0394805
        assert!((p.b[0] - 0.03955).abs() < 1e-15);
        assert!((p.sigma[(0, 0)].powi(2) / 2.0 - 0.0394805).abs() < 1e-15);
    }

    #[test]
    fn raising_vol_of_variance_breaks_clause_i() {
        let mut p = heston_reference();
        p.sigma[(0, 0)] = 0.3;
        let rep = validate_admissibility(&p).unwrap();
        assert_eq!(rep.clauses(), vec![Clause::AdmissibilityI]);
        assert_eq!(rep.violations[0].indices, vec![0]);
        assert!((rep.violations[0].rhs - 0.045).abs() < 1e-15);
    }

    #[test]
    fn off_diagonal_sigma_breaks_clause_iii() {
        let mut p = heston_reference();
        p.sigma[(0, 1)] = 0.1;
        let rep = validate_admissibility(&p).unwrap();
        assert_eq!(rep.clauses(), vec![Clause::AdmissibilityIII]);
        assert_eq!(rep.violations[0].indices, vec![0, 1]);
        assert_eq!(rep.violations[0].to_string(), "clause (iii) at (1,2): lhs = 1.000000e-1, bound = 0.000000e0");
    }

    #[test]
    fn boundary_feller_case_passes_and_slack_is_respected() {
        let mut p = heston_reference();
        p.b[0] = p.sigma[(0, 0)].powi(2) / 2.0;
        assert!(validate_admissibility(&p).unwrap().is_ok());
        p.b[0] -= 1e-9;
        assert!(!validate_admissibility(&p).unwrap().is_ok());
        assert!(validate_admissibility_with_slack(&p, 1e-8).unwrap().is_ok());
    }

    #[test]
    fn structural_errors_are_not_admissibility_failures() {
        let mut p = heston_reference();
        p.m = 3;
        assert!(matches!(validate_admissibility(&p), Err(Error::Structural(_))));
        p.m = 0;
        assert!(matches!(validate_admissibility(&p), Err(Error::Structural(_))));
        let p = heston_reference();
        let err = AffineModelParams::new(2, p.a.clone(), vec![0.0; 2], p.sigma, p.alpha, p.beta, p.x0);
        assert!(matches!(err, Err(Error::Structural(_))));
    }

    #[test]
    fn initial_state_must_be_interior() {
        let p = heston_reference().with_state(vec![0.0, 0.003, 0.0]);
        let rep = validate_admissibility(&p).unwrap();
        assert_eq!(rep.clauses(), vec![Clause::InitialState]);
    }

    #[test]
    fn drift_examples() {
        let p = heston_reference();
        let dr = drift(&p, &[0.07, 0.003, 0.0]);
        assert!(dr[0].abs() < 1e-16 && dr[1].abs() < 1e-16);
        assert!((dr[2] - 0.065).abs() < 1e-15);

        let mut z = p.clone();
        z.a = Matrix::zeros(3);
        z.b = vec![1.0, 0.0, 0.0];
        assert_eq!(drift(&z, &[0.3, 0.2, 7.0]), vec![1.0, 0.0, 0.0]);
        z.a = Matrix::identity(3);
        z.b = vec![0.0; 3];
        assert_eq!(drift(&z, &[1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn diffusion_squared_examples() {
        let p = heston_reference();
        assert_eq!(diffusion_squared(&p, &[0.2, 0.01, -1.0]).unwrap(), vec![0.2, 0.01, 0.2]);
        assert_eq!(diffusion_squared(&p, &[0.07, 0.003, 5.0]).unwrap(), vec![0.07, 0.003, 0.07]);

        let mut q = p.clone();
        q.alpha = vec![0.0; 3];
        q.beta = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        q.alpha[2] = 1.0;
        assert_eq!(diffusion_squared(&q, &[0.25, 0.5, 0.0]).unwrap()[0], 0.25);
        // alpha_3 = 0 with an empty beta column: R_33 vanishes on the interior.
        q.alpha[2] = 0.0;
        let err = diffusion_squared(&q, &[0.25, 0.5, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Rejected(ref r) if r.has(Clause::AdmissibilityV)));
        assert!(validate_admissibility(&q).unwrap().has(Clause::AdmissibilityV));
    }

    #[test]
    fn heston_stock_coefficients() {
        let p = heston_reference();
        let c = stock_coefficients(&p);
        assert!((c.sbar - 0.1).abs() < 1e-15);
        assert_eq!(c.mu1, 0.0);
        assert!(c.mu2.abs() < 1e-15, "mu2 = {}", c.mu2);
        assert_eq!(c.eta, vec![0.0]);
        assert_eq!(c.etabar, vec![0.0]);
        assert!((c.sigma + 0.558).abs() < 1e-15);
        assert!((c.drift_at(&[0.3, 0.01, 2.0]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_stock_row_gives_zero_coefficients() {
        let mut p = heston_reference();
        p.a = Matrix::zeros(3);
        p.b = vec![0.0; 3];
        for j in 0..3 {
            p.sigma[(2, j)] = 0.0;
        }
        let c = stock_coefficients(&p);
        assert_eq!((c.sbar, c.mu1, c.mu2, c.sigma), (0.0, 0.0, 0.0, 0.0));
        assert!(c.eta.iter().chain(&c.etabar).all(|&e| e == 0.0));
    }

    #[test]
    fn spec_affine_support_and_sign() {
        let ok = SpecAffine::new(0.1, vec![0.2, 0.0, 0.0]);
        assert!(ok.check(3, 2, Clause::AffineFunctional).unwrap().is_empty());
        let bad = SpecAffine::new(0.1, vec![0.2, 0.0, 0.3]);
        let v = bad.check(3, 2, Clause::AffineFunctional).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].indices, vec![2]);
        assert!(SpecAffine::new(-0.1, vec![0.0; 3]).check(3, 2, Clause::IntensityQ).unwrap()[0].clause == Clause::IntensityQ);
        assert!(SpecAffine::zero(3).is_identically_zero());
        assert!((ok.value(&[0.5, 1.0, 9.0]) - 0.2).abs() < 1e-15);
    }
}
