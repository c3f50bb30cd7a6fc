//! Fourier inversion in the log price: distribution function of `S_T` on
//! survival, calls and puts, Black–Scholes implied volatility, and an FFT
//! strike-grid path for surfaces.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::credit::{defaultable_bond, riskfree_bond, survival_probability, PricingContext};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_half_line, QuadratureConfig};
use crate::riccati::{AffineTransform, NumericTransform, C64};

/// Damping exponents: `w > 1` for calls, `y < 0` for puts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingConfig {
    pub w: f64,
    pub y: f64,
}

impl Default for DampingConfig {
    fn default() -> Self {
        Self { w: 1.5, y: -0.5 }
    }
}

impl DampingConfig {
    /// Tried when the configured exponent leaves the moment domain.
    pub const FALLBACK: DampingConfig = DampingConfig { w: 1.25, y: -0.25 };

    pub fn new(w: f64, y: f64) -> Result<Self> {
        if !(w > 1.0 && y < 0.0) {
            return Err(Error::invalid(format!("damping needs w > 1 and y < 0, got w = {w}, y = {y}")));
        }
        Ok(Self { w, y })
    }

    /// First exponent among `preferred`, `fallback` for which the risk-neutral
    /// Riccati system is solvable on `[0, tau]`.
    ///
    /// The probe always integrates numerically: closed forms do not report
    /// blow-up on their own.
    pub fn probe(ctx: &PricingContext, preferred: f64, fallback: f64, tau: f64) -> Result<f64> {
        let num = NumericTransform::new(ctx.q.params.clone(), ctx.q.flavor(), ctx.q.rate.clone()).with_tolerance(ctx.tol);
        for s in [preferred, fallback] {
            match num.coefficients(&ctx.log_price_arg(C64::new(s, 0.0)), tau) {
                Ok((phi, psi)) if phi.is_finite() && psi.iter().all(|p| p.is_finite()) => return Ok(s),
                Ok(_) | Err(Error::MomentExplosion { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::DampingOutsideMomentDomain {
            damping: preferred,
            maturity: tau,
        })
    }
}

/// Fourier price with diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierPrice {
    pub value: f64,
    /// Damping exponent actually used.
    pub damping: f64,
    pub nodes: usize,
    pub upper: f64,
}

/// `P(S_T <= level, tau > T)` given survival up to the valuation time.
pub fn survival_distribution(ctx: &PricingContext, level: f64, maturity: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(level > 0.0) {
        return Err(Error::invalid(format!("level = {level} must be positive")));
    }
    let tau = ctx.horizon(maturity)?;
    let surv = survival_probability(ctx, maturity)?;
    if tau == 0.0 {
        return Ok(if ctx.spot() <= level { surv } else { 0.0 });
    }
    let tr = ctx.physical()?;
    let log_x = level.ln();
    let mut failure = None;
    let integrand = |y: f64| -> f64 {
        // The integrand is regular at 0; stay off the removable singularity.
        let y = y.max(1e-6);
        match tr.transform(&ctx.log_price_arg(C64::new(0.0, y)), tau, &ctx.x) {
            Ok(t) => (C64::new(0.0, -y * log_x).exp() * t).im / y,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let r = integrate_half_line(integrand, cfg)?;
    if let Some(e) = failure {
        return Err(e);
    }
    // The integral is already scaled by the survival probability.
    Ok((0.5 * surv - r.value / PI).clamp(0.0, surv))
}

/// `(1/pi) int_0^inf Re[T(s + iu) K^-(s - 1 + iu) / ((s + iu)(s - 1 + iu))] du`
fn damped_integral(ctx: &PricingContext, strike: f64, tau: f64, s: f64, cfg: &QuadratureConfig) -> Result<(f64, usize, f64)> {
    let tr = ctx.risk_neutral()?;
    let log_k = strike.ln();
    let mut failure = None;
    let integrand = |u: f64| -> f64 {
        let z = C64::new(s, u);
        match tr.transform(&ctx.log_price_arg(z), tau, &ctx.x) {
            Ok(t) => (t * (-(z - 1.0) * log_k).exp() / (z * (z - 1.0))).re,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let r = integrate_half_line(integrand, cfg)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((r.value / PI, r.nodes, r.upper))
}

fn check_strike(strike: f64) -> Result<()> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::invalid(format!("strike = {strike} must be positive")));
    }
    Ok(())
}

/// European call on the defaultable stock; worthless on default.
pub fn call_price(
    ctx: &PricingContext,
    strike: f64,
    maturity: f64,
    damping: &DampingConfig,
    cfg: &QuadratureConfig,
) -> Result<FourierPrice> {
    check_strike(strike)?;
    let tau = ctx.horizon(maturity)?;
    let w = DampingConfig::probe(ctx, damping.w, DampingConfig::FALLBACK.w, tau)?;
    let (v, nodes, upper) = damped_integral(ctx, strike, tau, w, cfg)?;
    Ok(FourierPrice {
        value: v.max(0.0),
        damping: w,
        nodes,
        upper,
    })
}

/// European put on the defaultable stock; pays `K` on default.
pub fn put_price(
    ctx: &PricingContext,
    strike: f64,
    maturity: f64,
    damping: &DampingConfig,
    cfg: &QuadratureConfig,
) -> Result<FourierPrice> {
    check_strike(strike)?;
    let tau = ctx.horizon(maturity)?;
    let y = DampingConfig::probe(ctx, damping.y, DampingConfig::FALLBACK.y, tau)?;
    let (v, nodes, upper) = damped_integral(ctx, strike, tau, y, cfg)?;
    let floor = strike * (riskfree_bond(ctx, maturity)? - defaultable_bond(ctx, maturity)?);
    Ok(FourierPrice {
        value: floor + v.max(0.0),
        damping: y,
        nodes,
        upper,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// Black–Scholes price with discount factor `discount` in place of `e^{-rT}`.
pub fn black_scholes(kind: OptionKind, spot: f64, strike: f64, maturity: f64, discount: f64, vol: f64) -> f64 {
    let n = Normal::standard();
    let sd = vol * maturity.sqrt();
    let fwd_k = strike * discount;
    let d1 = ((spot / fwd_k).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    match kind {
        OptionKind::Call => spot * n.cdf(d1) - fwd_k * n.cdf(d2),
        OptionKind::Put => fwd_k * n.cdf(-d2) - spot * n.cdf(-d1),
    }
}

fn vega(spot: f64, strike: f64, maturity: f64, discount: f64, vol: f64) -> f64 {
    let sd = vol * maturity.sqrt();
    let d1 = ((spot / (strike * discount)).ln() + 0.5 * sd * sd) / sd;
    spot * (-0.5 * d1 * d1).exp() / (2.0 * PI).sqrt() * maturity.sqrt()
}

pub const VOL_BRACKET: (f64, f64) = (1e-6, 5.0);

/// Black–Scholes volatility reproducing `price`.
///
/// Newton steps are kept inside a shrinking bracket and replaced by bisection
/// whenever they would leave it.
pub fn implied_vol(kind: OptionKind, price: f64, spot: f64, strike: f64, maturity: f64, discount: f64) -> Result<f64> {
    if !(spot > 0.0 && strike > 0.0 && maturity > 0.0 && discount > 0.0) {
        return Err(Error::invalid("implied vol needs positive spot, strike, maturity and discount"));
    }
    let f = |v: f64| black_scholes(kind, spot, strike, maturity, discount, v) - price;
    let (mut lo, mut hi) = VOL_BRACKET;
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::NoImpliedVol {
            price,
            lower: price + flo,
            upper: price + fhi,
        });
    }
    let mut v = 0.2;
    for _ in 0..200 {
        let fv = f(v);
        if fv == 0.0 {
            return Ok(v);
        }
        if fv < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let step = fv / vega(spot, strike, maturity, discount, v);
        let mut next = v - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-15 * v.max(1.0) || hi - lo <= 1e-15 {
            return Ok(next);
        }
        v = next;
    }
    Ok(v)
}

/// Carr–Madan FFT settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FftConfig {
    pub n: usize,
    /// Frequency spacing; the log-strike spacing is `2 pi / (n eta)`.
    /// Simpson weights alias prices from `2 pi / (2 eta)` away in log strike,
    /// damped by `exp(-(w - 1) pi / eta)`.
    pub eta: f64,
}

impl Default for FftConfig {
    fn default() -> Self {
        Self { n: 4096, eta: 0.1 }
    }
}

/// Damped-integral values on a log-strike grid centred at the log spot.
#[derive(Clone, Debug)]
pub struct FftSlice {
    pub log_strikes: Vec<f64>,
    pub values: Vec<f64>,
}

impl FftSlice {
    /// Four-point Lagrange interpolation in log strike.
    pub fn at(&self, strike: f64) -> Result<f64> {
        let k = strike.ln();
        let k0 = self.log_strikes[0];
        let h = self.log_strikes[1] - k0;
        let pos = (k - k0) / h;
        let i = pos.floor() as isize;
        if i < 1 || i as usize + 2 >= self.values.len() {
            return Err(Error::invalid(format!("strike {strike} outside the FFT grid")));
        }
        let i = i as usize;
        let t = pos - i as f64;
        let y = &self.values[i - 1..i + 3];
        // Nodes at -1, 0, 1, 2 in units of h.
        Ok(-t * (t - 1.0) * (t - 2.0) / 6.0 * y[0] + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * y[1]
            - (t + 1.0) * t * (t - 2.0) / 2.0 * y[2]
            + (t + 1.0) * t * (t - 1.0) / 6.0 * y[3])
    }
}

/// `(1/pi) int_0^inf Re[...] du` for every log strike of the grid at once.
pub fn fft_slice(ctx: &PricingContext, maturity: f64, s: f64, fft: &FftConfig) -> Result<FftSlice> {
    let tau = ctx.horizon(maturity)?;
    let tr = ctx.risk_neutral()?;
    let n = fft.n;
    let lambda = 2.0 * PI / (n as f64 * fft.eta);
    let c = ctx.x[ctx.dim() - 1];
    let start = c - 0.5 * n as f64 * lambda;
    let mut buf = (0..n)
        .into_par_iter()
        .map(|j| {
            let v = j as f64 * fft.eta;
            let z = C64::new(s, v);
            let t = tr.transform(&ctx.log_price_arg(z), tau, &ctx.x)?;
            let simpson = match j {
                0 => 1.0,
                _ if j % 2 == 1 => 4.0,
                _ => 2.0,
            } * fft.eta
                / 3.0;
            Ok(C64::new(0.0, -v * start).exp() * t / (z * (z - 1.0)) * simpson)
        })
        .collect::<Result<Vec<C64>>>()?;
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let log_strikes: Vec<f64> = (0..n).map(|u| start + lambda * u as f64).collect();
    let values = log_strikes
        .iter()
        .zip(&buf)
        .map(|(k, b)| (-(s - 1.0) * k).exp() / PI * b.re)
        .collect();
    Ok(FftSlice { log_strikes, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceMethod {
    Direct,
    Fft,
}

/// One node of an option surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub maturity: f64,
    pub moneyness: f64,
    pub put_price: f64,
    pub call_price: f64,
    /// Black–Scholes vol of the put, discounted with the risk-free bond.
    pub implied_vol: f64,
    /// Same for the model with the risk-neutral intensity removed.
    pub implied_vol_default_free: f64,
}

/// Maturities `0.5, 0.75, 1, 1.5, 2, 2.5, 3`.
pub fn default_maturities() -> Vec<f64> {
    vec![0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0]
}

/// Moneyness `0.70, 0.75, .., 1.30`.
pub fn default_moneyness() -> Vec<f64> {
    (0..13).map(|i| 0.7 + 0.05 * i as f64).collect()
}

struct SlicePrices {
    puts: Vec<f64>,
    calls: Vec<f64>,
}

fn price_slice(
    ctx: &PricingContext,
    maturity: f64,
    strikes: &[f64],
    damping: &DampingConfig,
    cfg: &QuadratureConfig,
    method: SurfaceMethod,
) -> Result<SlicePrices> {
    match method {
        SurfaceMethod::Direct => {
            let pairs = strikes
                .par_iter()
                .map(|&k| {
                    Ok((
                        put_price(ctx, k, maturity, damping, cfg)?.value,
                        call_price(ctx, k, maturity, damping, cfg)?.value,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let (puts, calls) = pairs.into_iter().unzip();
            Ok(SlicePrices { puts, calls })
        }
        SurfaceMethod::Fft => {
            let tau = ctx.horizon(maturity)?;
            let w = DampingConfig::probe(ctx, damping.w, DampingConfig::FALLBACK.w, tau)?;
            let y = DampingConfig::probe(ctx, damping.y, DampingConfig::FALLBACK.y, tau)?;
            let fft = FftConfig::default();
            let call_grid = fft_slice(ctx, maturity, w, &fft)?;
            let put_grid = fft_slice(ctx, maturity, y, &fft)?;
            let gap = riskfree_bond(ctx, maturity)? - defaultable_bond(ctx, maturity)?;
            let mut puts = Vec::with_capacity(strikes.len());
            let mut calls = Vec::with_capacity(strikes.len());
            for &k in strikes {
                calls.push(call_grid.at(k)?.max(0.0));
                puts.push(k * gap + put_grid.at(k)?.max(0.0));
            }
            Ok(SlicePrices { puts, calls })
        }
    }
}

/// Put and call prices and implied vols over `maturities x moneyness`,
/// ordered by maturity then moneyness.
pub fn surface(
    ctx: &PricingContext,
    maturities: &[f64],
    moneyness: &[f64],
    damping: &DampingConfig,
    cfg: &QuadratureConfig,
    method: SurfaceMethod,
) -> Result<Vec<SurfaceRow>> {
    let spot = ctx.spot();
    let strikes: Vec<f64> = moneyness.iter().map(|m| m * spot).collect();
    let free = ctx.default_free();
    let slices = maturities
        .par_iter()
        .map(|&t| {
            let jtd = price_slice(ctx, t, &strikes, damping, cfg, method)?;
            let reference = price_slice(&free, t, &strikes, damping, cfg, method)?;
            let discount = riskfree_bond(ctx, t)?;
            let tau = ctx.horizon(t)?;
            (0..strikes.len())
                .map(|i| {
                    let k = strikes[i];
                    Ok(SurfaceRow {
                        maturity: t,
                        moneyness: moneyness[i],
                        put_price: jtd.puts[i],
                        call_price: jtd.calls[i],
                        implied_vol: implied_vol(OptionKind::Put, jtd.puts[i], spot, k, tau, discount)?,
                        implied_vol_default_free: implied_vol(
                            OptionKind::Put,
                            reference.puts[i],
                            spot,
                            k,
                            tau,
                            discount,
                        )?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(slices.into_iter().flatten().collect())
}
