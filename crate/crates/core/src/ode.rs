//! Adaptive Dormand–Prince 5(4) integrator for complex-valued systems with
//! the standard fourth-order continuous extension.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OdeTolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-9,
        }
    }
}

impl OdeTolerance {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            atol: self.atol * factor,
            rtol: self.rtol * factor,
        }
    }
}

/// Blow-up policy: the watched components may not exceed `limit` in modulus
/// and the step may not fall under `min_step_fraction * t_end`.
#[derive(Clone, Debug)]
pub struct BlowUp {
    pub watch: std::ops::Range<usize>,
    pub limit: f64,
    pub min_step_fraction: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Debug)]
struct Segment {
    t0: f64,
    h: f64,
    /// Continuous-extension coefficients, five blocks of length `n`.
    rcont: Vec<C64>,
}

/// Accepted steps of an integration with dense output on `[0, t_end]`.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    n: usize,
    y0: Vec<C64>,
    segments: Vec<Segment>,
    nodes: Vec<f64>,
    values: Vec<Vec<C64>>,
    /// Largest accepted error norm (relative to tolerance), useful as a diagnostic.
    pub max_error_ratio: f64,
    pub rejected_steps: usize,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn t_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_values(&self) -> &[Vec<C64>] {
        &self.values
    }

    pub fn last(&self) -> &[C64] {
        self.values.last().unwrap()
    }

    /// State at time `t`, clamped to `[0, t_end]`.
    pub fn eval(&self, t: f64) -> Vec<C64> {
        let n = self.n;
        if self.segments.is_empty() || t <= 0.0 {
            return self.y0.clone();
        }
        if t >= self.t_end() {
            return self.last().to_vec();
        }
        let idx = match self
            .segments
            .binary_search_by(|s| s.t0.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let seg = &self.segments[idx];
        let theta = (t - seg.t0) / seg.h;
        let theta1 = 1.0 - theta;
        let r = &seg.rcont;
        (0..n)
            .map(|i| {
                r[i] + theta
                    * (r[n + i] + theta1 * (r[2 * n + i] + theta * (r[3 * n + i] + theta1 * r[4 * n + i])))
            })
            .collect()
    }
}

fn error_norm(err: &[C64], y_old: &[C64], y_new: &[C64], tol: OdeTolerance) -> f64 {
    let mut acc = 0.0;
    for i in 0..err.len() {
        let sk = tol.atol + tol.rtol * y_old[i].norm().max(y_new[i].norm());
        acc += (err[i].re / sk).powi(2) + (err[i].im / sk).powi(2);
    }
    (acc / (2 * err.len()) as f64).sqrt()
}

fn rms(v: &[C64]) -> f64 {
    (v.iter().map(|c| c.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `0` to `t_end`.
///
/// `f(t, y, dy)` writes the derivative into `dy`.
pub fn integrate<F>(mut f: F, y0: &[C64], t_end: f64, tol: OdeTolerance, blow_up: &BlowUp) -> Result<DenseSolution>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let mut sol = DenseSolution {
        n,
        y0: y0.to_vec(),
        segments: Vec::new(),
        nodes: vec![0.0],
        values: vec![y0.to_vec()],
        max_error_ratio: 0.0,
        rejected_steps: 0,
    };
    if t_end <= 0.0 {
        return Ok(sol);
    }

    let z = C64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut k1 = vec![z; n];
    let mut k2 = vec![z; n];
    let mut k3 = vec![z; n];
    let mut k4 = vec![z; n];
    let mut k5 = vec![z; n];
    let mut k6 = vec![z; n];
    let mut k7 = vec![z; n];
    let mut ytmp = vec![z; n];
    let mut ynew = vec![z; n];
    let mut err = vec![z; n];

    f(0.0, &y, &mut k1);

    // Initial step guess.
    let mut h = {
        let d0 = rms(&y);
        let d1 = rms(&k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-3 } else { 0.01 * d0 / d1 };
        h0.min(t_end).max(1e-6 * t_end)
    };

    let min_step = blow_up.min_step_fraction * t_end;
    let mut t = 0.0;
    let mut last_rejected = false;

    while t < t_end {
        if t + h >= t_end {
            h = t_end - t;
        }
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, &ynew, &mut k7);
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }

        let finite = ynew.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        let e = if finite { error_norm(&err, &y, &ynew, tol) } else { f64::INFINITY };

        if e <= 1.0 {
            let mut rcont = Vec::with_capacity(5 * n);
            let ydiff: Vec<C64> = (0..n).map(|i| ynew[i] - y[i]).collect();
            let bspl: Vec<C64> = (0..n).map(|i| h * k1[i] - ydiff[i]).collect();
            rcont.extend_from_slice(&y);
            rcont.extend_from_slice(&ydiff);
            rcont.extend_from_slice(&bspl);
            rcont.extend((0..n).map(|i| ydiff[i] - h * k7[i] - bspl[i]));
            rcont.extend((0..n).map(|i| {
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            }));
            sol.segments.push(Segment { t0: t, h, rcont });

            t = if t + h >= t_end { t_end } else { t + h };
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            sol.nodes.push(t);
            sol.values.push(y.clone());
            sol.max_error_ratio = sol.max_error_ratio.max(e);

            if y[blow_up.watch.clone()].iter().any(|c| c.norm() > blow_up.limit) {
                return Err(Error::MomentExplosion { time: t });
            }

            let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            let fac = if last_rejected { fac.min(1.0) } else { fac };
            h *= fac;
            last_rejected = false;
        } else {
            sol.rejected_steps += 1;
            let fac = if e.is_finite() { (0.9 * e.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
            last_rejected = true;
            if h < min_step {
                return Err(Error::MomentExplosion { time: t });
            }
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_blowup(n: usize) -> BlowUp {
        BlowUp {
            watch: 0..n,
            limit: 1e8,
            min_step_fraction: 1e-13,
        }
    }

    #[test]
    fn complex_exponential_and_dense_output() {
        // y' = (-0.5 + 2i) y, y(0) = 1
        let lam = C64::new(-0.5, 2.0);
        let sol = integrate(
            |_, y, dy| dy[0] = lam * y[0],
            &[C64::new(1.0, 0.0)],
            3.0,
            OdeTolerance::default(),
            &no_blowup(1),
        )
        .unwrap();
        for &t in &[0.0, 0.123, 1.0, 1.777, 2.5, 3.0] {
            let exact = (lam * t).exp();
            assert!((sol.eval(t)[0] - exact).norm() < 1e-8, "t = {t}");
        }
        assert!((sol.last()[0] - (lam * 3.0).exp()).norm() < 1e-9);
    }

    #[test]
    fn riccati_blow_up_is_detected() {
        // y' = y^2, y(0) = 1 explodes at t = 1.
        let err = integrate(
            |_, y, dy| dy[0] = y[0] * y[0],
            &[C64::new(1.0, 0.0)],
            2.0,
            OdeTolerance::default(),
            &no_blowup(1),
        )
        .unwrap_err();
        match err {
            Error::MomentExplosion { time } => assert!((time - 1.0).abs() < 1e-3, "time {time}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn zero_horizon_returns_initial_value() {
        let sol = integrate(|_, _, dy| dy[0] = C64::new(1.0, 0.0), &[C64::new(2.0, 1.0)], 0.0, OdeTolerance::default(), &no_blowup(1)).unwrap();
        assert_eq!(sol.last()[0], C64::new(2.0, 1.0));
        assert_eq!(sol.eval(0.5)[0], C64::new(2.0, 1.0));
    }
}
