//! Riccati system of the exponential-affine transform.
//!
//! For a flavor with intensity `lambda = lbar + Lambda^T x` and, when
//! discounting, short rate `r = rbar + Upsilon^T x`,
//!
//! ```text
//! E[exp(-int_t^u (lambda + r) ds) exp(z^T X_u) | X_t = x] = exp(Phi(u - t, z) + Psi(u - t, z)^T x)
//! Phi' = b^T Psi + 1/2 sum_k alpha_k (Sigma^T Psi)_k^2 - lbar - rbar
//! Psi' = A^T Psi + 1/2 sum_k beta_{., k} (Sigma^T Psi)_k^2 - Lambda - Upsilon
//! Phi(0) = 0, Psi(0) = z
//! ```

use num_complex::Complex64;

use crate::affine::{AffineModelParams, SpecAffine};
use crate::error::{Error, Result};
use crate::ode::{integrate, BlowUp, DenseSolution, OdeTolerance};

pub type C64 = Complex64;

/// `|Psi|` above this is treated as a moment explosion.
pub const BLOW_UP_LIMIT: f64 = 1e8;
/// Step sizes below this fraction of the horizon are treated as a moment explosion.
pub const MIN_STEP_FRACTION: f64 = 1e-13;

/// Which killing terms enter the system.
///
/// Under the physical measure only the intensity kills; a risk-neutral flavor
/// also discounts at the short rate.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureFlavor {
    pub discount_rate: bool,
    pub intensity: SpecAffine,
}

impl MeasureFlavor {
    pub fn physical(intensity: SpecAffine) -> Self {
        Self {
            discount_rate: false,
            intensity,
        }
    }

    pub fn risk_neutral(intensity: SpecAffine) -> Self {
        Self {
            discount_rate: true,
            intensity,
        }
    }
}

pub fn real_to_complex(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

/// `true` when `z` lies in `C^m_- x iR^{d-m}`, where the transform is finite for every horizon.
pub fn in_transform_domain(m: usize, z: &[C64]) -> bool {
    z.iter()
        .enumerate()
        .all(|(i, c)| if i < m { c.re <= 0.0 } else { c.re == 0.0 })
}

/// Coefficients of the right-hand side, laid out for fast evaluation.
#[derive(Clone, Debug)]
struct Rhs {
    d: usize,
    /// `A` row major; the system uses its transpose.
    a: Vec<f64>,
    b: Vec<f64>,
    sigma: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    kill_bar: f64,
    kill_vec: Vec<f64>,
}

impl Rhs {
    fn new(params: &AffineModelParams, flavor: &MeasureFlavor, rate: &SpecAffine) -> Self {
        let kill = if flavor.discount_rate {
            flavor.intensity.plus(rate)
        } else {
            flavor.intensity.clone()
        };
        Self {
            d: params.d,
            a: params.a.iter().collect(),
            b: params.b.clone(),
            sigma: params.sigma.iter().collect(),
            alpha: params.alpha.clone(),
            beta: params.beta.iter().collect(),
            kill_bar: kill.bar,
            kill_vec: kill.vec,
        }
    }

    /// `s = Sigma^T psi`
    fn sigma_t(&self, psi: &[C64], s: &mut [C64]) {
        let d = self.d;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk = (0..d).map(|i| self.sigma[i * d + k] * psi[i]).sum();
        }
    }

    /// State layout: `[Phi, Psi, (dPhi, dPsi) per tangent direction]`.
    fn eval(&self, y: &[C64], dy: &mut [C64], s: &mut [C64], sd: &mut [C64]) {
        let d = self.d;
        let psi = &y[1..=d];
        self.sigma_t(psi, s);
        dy[0] = (0..d).map(|i| self.b[i] * psi[i]).sum::<C64>()
            + 0.5 * (0..d).map(|k| self.alpha[k] * s[k] * s[k]).sum::<C64>()
            - self.kill_bar;
        for i in 0..d {
            let lin: C64 = (0..d).map(|j| self.a[j * d + i] * psi[j]).sum();
            let quad: C64 = (0..d).map(|k| self.beta[i * d + k] * s[k] * s[k]).sum();
            dy[1 + i] = lin + 0.5 * quad - self.kill_vec[i];
        }
        let n_tangent = y.len() / (d + 1) - 1;
        for t in 1..=n_tangent {
            let off = t * (d + 1);
            let dpsi = &y[off + 1..off + 1 + d];
            self.sigma_t(dpsi, sd);
            dy[off] = (0..d).map(|i| self.b[i] * dpsi[i]).sum::<C64>()
                + (0..d).map(|k| self.alpha[k] * s[k] * sd[k]).sum::<C64>();
            for i in 0..d {
                let lin: C64 = (0..d).map(|j| self.a[j * d + i] * dpsi[j]).sum();
                let quad: C64 = (0..d).map(|k| self.beta[i * d + k] * s[k] * sd[k]).sum();
                dy[off + 1 + i] = lin + quad;
            }
        }
    }
}

/// Solution of the Riccati system on `[0, T]` with dense output, optionally
/// carrying first-order sensitivities with respect to the initial condition.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub z: Vec<C64>,
    pub tol: OdeTolerance,
    directions: Vec<Vec<C64>>,
    dense: DenseSolution,
}

impl RiccatiSolution {
    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dense.t_end()
    }

    /// Accepted step nodes, starting at `0` and ending at `T`.
    pub fn grid(&self) -> &[f64] {
        self.dense.nodes()
    }

    /// `(Phi, Psi)` at every grid node.
    pub fn grid_values(&self) -> impl Iterator<Item = (f64, C64, &[C64])> + '_ {
        let d = self.dim();
        self.dense
            .nodes()
            .iter()
            .zip(self.dense.node_values())
            .map(move |(&t, y)| (t, y[0], &y[1..=d]))
    }

    pub fn max_error_ratio(&self) -> f64 {
        self.dense.max_error_ratio
    }

    fn state(&self, t: f64) -> Vec<C64> {
        if t == self.horizon() {
            self.dense.last().to_vec()
        } else {
            self.dense.eval(t)
        }
    }

    /// `(Phi(t), Psi(t))`; exact initial condition at `t = 0`.
    pub fn at(&self, t: f64) -> (C64, Vec<C64>) {
        if t <= 0.0 {
            return (C64::new(0.0, 0.0), self.z.clone());
        }
        let y = self.state(t);
        (y[0], y[1..=self.dim()].to_vec())
    }

    /// Directional derivatives `(dPhi(t), dPsi(t))` along the `index`-th direction.
    pub fn tangent_at(&self, index: usize, t: f64) -> (C64, Vec<C64>) {
        let d = self.dim();
        if t <= 0.0 {
            return (C64::new(0.0, 0.0), self.directions[index].clone());
        }
        let y = self.state(t);
        let off = (index + 1) * (d + 1);
        (y[off], y[off + 1..off + 1 + d].to_vec())
    }

    /// `exp(Phi(t) + Psi(t)^T x)`
    pub fn transform(&self, t: f64, x: &[f64]) -> C64 {
        let (phi, psi) = self.at(t);
        exponent(phi, &psi, x).exp()
    }

    /// Derivative of `transform(t, x)` along the `index`-th direction.
    pub fn transform_derivative(&self, index: usize, t: f64, x: &[f64]) -> C64 {
        let (dphi, dpsi) = self.tangent_at(index, t);
        self.transform(t, x) * exponent(dphi, &dpsi, x)
    }
}

pub(crate) fn exponent(phi: C64, psi: &[C64], x: &[f64]) -> C64 {
    phi + psi.iter().zip(x).map(|(p, &xi)| p * xi).sum::<C64>()
}

/// Integrates the Riccati system and, for each entry of `directions`, its
/// forward sensitivity with respect to `z`.
pub fn solve_with_tangents(
    params: &AffineModelParams,
    flavor: &MeasureFlavor,
    rate: &SpecAffine,
    z: &[C64],
    horizon: f64,
    directions: &[Vec<C64>],
    tol: OdeTolerance,
) -> Result<RiccatiSolution> {
    params.check_structure()?;
    let d = params.d;
    if z.len() != d || directions.iter().any(|v| v.len() != d) {
        return Err(Error::structural(format!("transform argument must have {d} components")));
    }
    if flavor.intensity.vec.len() != d || rate.vec.len() != d {
        return Err(Error::structural(format!("affine functionals must have {d} coefficients")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon {horizon} must be finite and nonnegative")));
    }
    let rhs = Rhs::new(params, flavor, rate);
    let zero = C64::new(0.0, 0.0);
    let mut y0 = Vec::with_capacity((d + 1) * (1 + directions.len()));
    y0.push(zero);
    y0.extend_from_slice(z);
    for dir in directions {
        y0.push(zero);
        y0.extend_from_slice(dir);
    }
    let mut s = vec![zero; d];
    let mut sd = vec![zero; d];
    let blow_up = BlowUp {
        watch: 1..d + 1,
        limit: BLOW_UP_LIMIT,
        min_step_fraction: MIN_STEP_FRACTION,
    };
    let dense = integrate(|_, y, dy| rhs.eval(y, dy, &mut s, &mut sd), &y0, horizon, tol, &blow_up)?;
    Ok(RiccatiSolution {
        z: z.to_vec(),
        tol,
        directions: directions.to_vec(),
        dense,
    })
}

pub fn solve(
    params: &AffineModelParams,
    flavor: &MeasureFlavor,
    rate: &SpecAffine,
    z: &[C64],
    horizon: f64,
) -> Result<RiccatiSolution> {
    solve_with_tangents(params, flavor, rate, z, horizon, &[], OdeTolerance::default())
}

/// `E[exp(-int_t^u kill) exp(z^T X_u) | X_t = x]`
pub fn transform(
    params: &AffineModelParams,
    flavor: &MeasureFlavor,
    rate: &SpecAffine,
    z: &[C64],
    t: f64,
    u: f64,
    x: &[f64],
) -> Result<C64> {
    check_times(t, u)?;
    let sol = solve(params, flavor, rate, z, u - t)?;
    Ok(sol.transform(u - t, x))
}

/// Partial derivative of [`transform`] with respect to `z_k` at `z0`.
#[allow(clippy::too_many_arguments)]
pub fn transform_gradient(
    params: &AffineModelParams,
    flavor: &MeasureFlavor,
    rate: &SpecAffine,
    z0: &[C64],
    k: usize,
    t: f64,
    u: f64,
    x: &[f64],
) -> Result<C64> {
    check_times(t, u)?;
    if k >= params.d {
        return Err(Error::invalid(format!("component {k} out of range for d = {}", params.d)));
    }
    let mut e = vec![C64::new(0.0, 0.0); params.d];
    e[k] = C64::new(1.0, 0.0);
    let sol = solve_with_tangents(params, flavor, rate, z0, u - t, &[e], OdeTolerance::default())?;
    Ok(sol.transform_derivative(0, u - t, x))
}

fn check_times(t: f64, u: f64) -> Result<()> {
    if !(t >= 0.0 && u >= t) {
        return Err(Error::invalid(format!("need 0 <= t <= u, got t = {t}, u = {u}")));
    }
    Ok(())
}

/// Source of `(Phi(tau, z), Psi(tau, z))` for a fixed model and flavor.
pub trait AffineTransform: Sync {
    fn dim(&self) -> usize;

    fn coefficients(&self, z: &[C64], tau: f64) -> Result<(C64, Vec<C64>)>;

    fn transform(&self, z: &[C64], tau: f64, x: &[f64]) -> Result<C64> {
        let (phi, psi) = self.coefficients(z, tau)?;
        Ok(exponent(phi, &psi, x).exp())
    }
}

/// [`AffineTransform`] backed by numerical integration.
#[derive(Clone, Debug)]
pub struct NumericTransform {
    pub params: AffineModelParams,
    pub flavor: MeasureFlavor,
    pub rate: SpecAffine,
    pub tol: OdeTolerance,
}

impl NumericTransform {
    pub fn new(params: AffineModelParams, flavor: MeasureFlavor, rate: SpecAffine) -> Self {
        Self {
            params,
            flavor,
            rate,
            tol: OdeTolerance::default(),
        }
    }

    pub fn with_tolerance(mut self, tol: OdeTolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn solve(&self, z: &[C64], horizon: f64, directions: &[Vec<C64>]) -> Result<RiccatiSolution> {
        solve_with_tangents(&self.params, &self.flavor, &self.rate, z, horizon, directions, self.tol)
    }
}

impl AffineTransform for NumericTransform {
    fn dim(&self) -> usize {
        self.params.d
    }

    fn coefficients(&self, z: &[C64], tau: f64) -> Result<(C64, Vec<C64>)> {
        Ok(self.solve(z, tau, &[])?.at(tau))
    }
}
