//! Path simulation of the factor process and the default time, and
//! Monte Carlo estimators for every analytic quantity.
//!
//! Each path draws from its own ChaCha stream selected by the path index, so
//! a batch depends only on the seed, never on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{AffineModelParams, SpecAffine};
use crate::credit::{CdsSchedule, PricingContext};
use crate::error::{Error, Result};
use crate::riccati::C64;

/// Paths per parallel work unit; also the first level of the summation tree.
pub const BLOCK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Full-truncation Euler on every component.
    Euler,
    /// Noncentral chi-square steps for the square-root block, with the real
    /// block driven by the recovered Brownian increments. Needs every
    /// square-root component to be an autonomous CIR process.
    ExactCir,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps_per_year: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps_per_year: usize, seed: u64, scheme: Scheme) -> Result<Self> {
        if n_paths == 0 || n_steps_per_year == 0 {
            return Err(Error::invalid("n_paths and n_steps_per_year must be at least 1"));
        }
        Ok(Self {
            n_paths,
            n_steps_per_year,
            seed,
            scheme,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimMeasure {
    #[serde(rename = "P")]
    Physical,
    #[serde(rename = "Q")]
    RiskNeutral,
}

impl SimMeasure {
    fn label(self) -> &'static str {
        match self {
            SimMeasure::Physical => "P",
            SimMeasure::RiskNeutral => "Q",
        }
    }
}

/// Simulated paths, stored per path and monitoring date.
///
/// Factors are simulated past the default time; functionals apply the survival
/// indicator themselves. The substream of path `i` is `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBatch {
    pub measure: SimMeasure,
    pub config: SimConfig,
    pub d: usize,
    /// Monitoring dates, increasing; the last one is the horizon.
    pub dates: Vec<f64>,
    /// `states[(p * dates.len() + k) * d + i]`
    pub states: Vec<f64>,
    /// `int_0^{dates[k]} r`, indexed like `states` without the last axis.
    pub int_rate: Vec<f64>,
    pub int_intensity: Vec<f64>,
    /// `+inf` on paths surviving the horizon.
    pub default_time: Vec<f64>,
    /// `exp(-int_0^tau r)` on defaulted paths, 0 elsewhere.
    pub discount_at_default: Vec<f64>,
    /// Euler steps that left the square-root domain before truncation.
    pub truncations: u64,
}

impl PathBatch {
    pub fn n_paths(&self) -> usize {
        self.default_time.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.dates.last().unwrap()
    }

    pub fn date_index(&self, t: f64) -> Result<usize> {
        self.dates
            .iter()
            .position(|&s| (s - t).abs() < 1e-9)
            .ok_or_else(|| Error::invalid(format!("date {t} is not monitored by the batch")))
    }

    pub fn state(&self, path: usize, date: usize) -> &[f64] {
        let o = (path * self.dates.len() + date) * self.d;
        &self.states[o..o + self.d]
    }

    pub fn survives(&self, path: usize, t: f64) -> bool {
        self.default_time[path] > t
    }

    pub fn defaulted(&self, path: usize) -> bool {
        self.default_time[path].is_finite()
    }

    /// Little-endian dump: magic `DFAPATH1`, then `seed, n_paths,
    /// n_steps_per_year, scheme, measure, d, n_dates` as `u64`, the dates, and
    /// per path `default_time, discount_at_default, int_intensity`, the rate
    /// integrals and the states, all `f64`.
    pub fn write_binary<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"DFAPATH1")?;
        let c = &self.config;
        let scheme = match c.scheme {
            Scheme::Euler => 0u64,
            Scheme::ExactCir => 1,
        };
        let measure = match self.measure {
            SimMeasure::Physical => 0u64,
            SimMeasure::RiskNeutral => 1,
        };
        for v in [c.seed, c.n_paths as u64, c.n_steps_per_year as u64, scheme, measure, self.d as u64, self.dates.len() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        let nd = self.dates.len();
        let mut put = |v: f64| w.write_all(&v.to_le_bytes());
        for &t in &self.dates {
            put(t)?;
        }
        for p in 0..self.n_paths() {
            put(self.default_time[p])?;
            put(self.discount_at_default[p])?;
            put(self.int_intensity[p])?;
            for &v in &self.int_rate[p * nd..(p + 1) * nd] {
                put(v)?;
            }
            for &v in &self.states[p * nd * self.d..(p + 1) * nd * self.d] {
                put(v)?;
            }
        }
        Ok(())
    }
}

/// Dense copy of the parameters for the inner loop.
struct Model {
    d: usize,
    m: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<Vec<f64>>,
    x0: Vec<f64>,
    intensity: SpecAffine,
    rate: SpecAffine,
}

impl Model {
    fn new(params: &AffineModelParams, intensity: &SpecAffine, rate: &SpecAffine) -> Self {
        Self {
            d: params.d,
            m: params.m,
            a: params.a.to_rows(),
            b: params.b.clone(),
            sigma: params.sigma.to_rows(),
            alpha: params.alpha.clone(),
            beta: params.beta.to_rows(),
            x0: params.x0.clone(),
            intensity: intensity.clone(),
            rate: rate.clone(),
        }
    }

    fn exact_cir_supported(&self) -> bool {
        (0..self.m).all(|i| {
            self.alpha[i] == 0.0
                && (0..self.d).all(|j| j == i || (self.a[i][j] == 0.0 && self.sigma[i][j] == 0.0))
                && (0..self.m).all(|j| j == i || self.beta[j][i] == 0.0)
        })
    }

    /// `alpha_k + sum_i beta_ik x_i^+`, floored at 0.
    fn r_diag(&self, x: &[f64], k: usize) -> f64 {
        (self.alpha[k] + (0..self.m).map(|i| self.beta[i][k] * x[i].max(0.0)).sum::<f64>()).max(0.0)
    }

    fn functional(f: &SpecAffine, x: &[f64], m: usize) -> f64 {
        f.bar + f.vec.iter().enumerate().map(|(i, c)| if i < m { c * x[i].max(0.0) } else { c * x[i] }).sum::<f64>()
    }
}

fn noncentral_chi_square<R: Rng>(rng: &mut R, df: f64, nc: f64) -> f64 {
    let n = if nc > 0.0 { Poisson::new(0.5 * nc).map(|p| p.sample(rng)).unwrap_or(0.0) } else { 0.0 };
    let shape = 0.5 * df + n;
    if shape <= 0.0 {
        return 0.0;
    }
    2.0 * Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
}

struct PathOut {
    states: Vec<f64>,
    int_rate: Vec<f64>,
    int_intensity: f64,
    default_time: f64,
    discount_at_default: f64,
    truncations: u64,
}

fn simulate_path(model: &Model, grid: &[f64], monitor: &[usize], cfg: &SimConfig, path: usize) -> PathOut {
    let (d, m) = (model.d, model.m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path as u64);
    let threshold: f64 = Exp1.sample(&mut rng);

    let mut out = PathOut {
        states: vec![0.0; monitor.len() * d],
        int_rate: vec![0.0; monitor.len()],
        int_intensity: 0.0,
        default_time: f64::INFINITY,
        discount_at_default: 0.0,
        truncations: 0,
    };
    let mut x = model.x0.clone();
    let mut next = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let (mut big_lambda, mut big_r) = (0.0, 0.0);
    let mut lam = Model::functional(&model.intensity, &x, m);
    let mut r = Model::functional(&model.rate, &x, m);
    let mut mon = 0;
    if monitor[0] == 0 {
        out.states[..d].copy_from_slice(&x);
        out.int_rate[0] = 0.0;
        mon = 1;
    }

    for n in 0..grid.len() - 1 {
        let dt = grid[n + 1] - grid[n];
        match cfg.scheme {
            Scheme::Euler => {
                for k in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    xi[k] = (model.r_diag(&x, k) * dt).sqrt() * z;
                }
                for i in 0..d {
                    let drift = model.b[i]
                        + (0..d).map(|j| model.a[i][j] * if j < m { x[j].max(0.0) } else { x[j] }).sum::<f64>();
                    next[i] = x[i] + drift * dt + (0..d).map(|k| model.sigma[i][k] * xi[k]).sum::<f64>();
                }
                out.truncations += (0..m).filter(|&i| next[i] < 0.0).count() as u64;
            }
            Scheme::ExactCir => {
                for i in 0..m {
                    let (b, a) = (model.b[i], model.a[i][i]);
                    let s2 = model.sigma[i][i].powi(2) * model.beta[i][i];
                    if s2 > 0.0 {
                        let c = if a != 0.0 { s2 * (a * dt).exp_m1() / (4.0 * a) } else { s2 * dt / 4.0 };
                        let nc = x[i] * (a * dt).exp() / c;
                        next[i] = c * noncentral_chi_square(&mut rng, 4.0 * b / s2, nc);
                    } else if a != 0.0 {
                        next[i] = x[i] * (a * dt).exp() + b * (a * dt).exp_m1() / a;
                    } else {
                        next[i] = x[i] + b * dt;
                    }
                }
                let mid: Vec<f64> = (0..m).map(|i| 0.5 * (x[i] + next[i])).collect();
                for k in 0..d {
                    let var = (model.alpha[k] + (0..m).map(|i| model.beta[i][k] * mid[i]).sum::<f64>()).max(0.0) * dt;
                    xi[k] = if k < m && model.sigma[k][k] != 0.0 {
                        // Recovered from the exact step.
                        (next[k] - x[k] - (model.b[k] + model.a[k][k] * mid[k]) * dt) / model.sigma[k][k]
                    } else {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        var.sqrt() * z
                    };
                }
                for i in m..d {
                    let drift = model.b[i]
                        + (0..m).map(|j| model.a[i][j] * mid[j]).sum::<f64>()
                        + (m..d).map(|j| model.a[i][j] * x[j]).sum::<f64>();
                    next[i] = x[i] + drift * dt + (0..d).map(|k| model.sigma[i][k] * xi[k]).sum::<f64>();
                }
            }
        }
        // Full truncation: negative values stay in the state, clipped wherever used.
        std::mem::swap(&mut x, &mut next);
        let (lam_next, r_next) = (Model::functional(&model.intensity, &x, m), Model::functional(&model.rate, &x, m));
        let lambda_step = 0.5 * (lam + lam_next) * dt;
        let r_step = 0.5 * (r + r_next) * dt;
        if out.default_time.is_infinite() && big_lambda + lambda_step >= threshold {
            let frac = if lambda_step > 0.0 { (threshold - big_lambda) / lambda_step } else { 0.0 };
            out.default_time = grid[n] + frac * dt;
            out.discount_at_default = (-(big_r + frac * r_step)).exp();
        }
        big_lambda += lambda_step;
        big_r += r_step;
        lam = lam_next;
        r = r_next;
        if mon < monitor.len() && monitor[mon] == n + 1 {
            for (i, v) in out.states[mon * d..(mon + 1) * d].iter_mut().enumerate() {
                *v = if i < m { x[i].max(0.0) } else { x[i] };
            }
            out.int_rate[mon] = big_r;
            mon += 1;
        }
    }
    out.int_intensity = big_lambda;
    out
}

/// Time grid containing every monitoring date, with at most
/// `1 / n_steps_per_year` between points. Returns the grid and the index of
/// each date in it.
fn time_grid(dates: &[f64], steps_per_year: usize) -> (Vec<f64>, Vec<usize>) {
    let mut grid = vec![0.0];
    let mut idx = Vec::with_capacity(dates.len());
    let mut prev = 0.0;
    for &t in dates {
        let n = ((t - prev) * steps_per_year as f64 - 1e-9).ceil().max(0.0) as usize;
        for j in 1..=n {
            grid.push(prev + (t - prev) * j as f64 / n as f64);
        }
        idx.push(grid.len() - 1);
        prev = t;
    }
    (grid, idx)
}

/// Simulates `X` from `params.x0` with default intensity `intensity`.
///
/// `dates` lists the monitoring dates; its maximum is the horizon.
pub fn simulate(
    params: &AffineModelParams,
    intensity: &SpecAffine,
    rate: &SpecAffine,
    measure: SimMeasure,
    dates: &[f64],
    cfg: &SimConfig,
) -> Result<PathBatch> {
    if cfg.n_paths == 0 || cfg.n_steps_per_year == 0 {
        return Err(Error::invalid("n_paths and n_steps_per_year must be at least 1"));
    }
    let mut dates = dates.to_vec();
    if dates.is_empty() || dates.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid("monitoring dates must be finite and nonnegative"));
    }
    dates.sort_by(f64::total_cmp);
    dates.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let model = Model::new(params, intensity, rate);
    if cfg.scheme == Scheme::ExactCir && !model.exact_cir_supported() {
        return Err(Error::invalid("exact CIR stepping needs autonomous square-root components"));
    }
    let (grid, monitor) = time_grid(&dates, cfg.n_steps_per_year);
    let d = params.d;
    let nd = dates.len();

    let blocks: Vec<Vec<PathOut>> = (0..cfg.n_paths.div_ceil(BLOCK))
        .into_par_iter()
        .map(|blk| {
            (blk * BLOCK..((blk + 1) * BLOCK).min(cfg.n_paths))
                .map(|p| simulate_path(&model, &grid, &monitor, cfg, p))
                .collect()
        })
        .collect();

    let n = cfg.n_paths;
    let mut batch = PathBatch {
        measure,
        config: *cfg,
        d,
        dates,
        states: Vec::with_capacity(n * nd * d),
        int_rate: Vec::with_capacity(n * nd),
        int_intensity: Vec::with_capacity(n),
        default_time: Vec::with_capacity(n),
        discount_at_default: Vec::with_capacity(n),
        truncations: 0,
    };
    for p in blocks.into_iter().flatten() {
        batch.states.extend_from_slice(&p.states);
        batch.int_rate.extend_from_slice(&p.int_rate);
        batch.int_intensity.push(p.int_intensity);
        batch.default_time.push(p.default_time);
        batch.discount_at_default.push(p.discount_at_default);
        batch.truncations += p.truncations;
    }
    Ok(batch)
}

/// Physical-measure batch started from the context's state.
pub fn simulate_physical(ctx: &PricingContext, dates: &[f64], cfg: &SimConfig) -> Result<PathBatch> {
    let params = ctx.p_params.with_state(ctx.x.clone());
    simulate(&params, &ctx.lambda_p, &ctx.q.rate, SimMeasure::Physical, dates, cfg)
}

/// Risk-neutral batch started from the context's state.
pub fn simulate_risk_neutral(ctx: &PricingContext, dates: &[f64], cfg: &SimConfig) -> Result<PathBatch> {
    let params = ctx.q.params.with_state(ctx.x.clone());
    simulate(&params, &ctx.q.lambda_q, &ctx.q.rate, SimMeasure::RiskNeutral, dates, cfg)
}

/// Quantity estimated from a batch. Maturities must be monitoring dates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Functional {
    /// `P(tau > T)`
    Survival { maturity: f64 },
    /// `P(S_T <= level, tau > T)`
    Distribution { level: f64, maturity: f64 },
    Bond { maturity: f64 },
    RiskfreeBond { maturity: f64 },
    Call { strike: f64, maturity: f64 },
    Put { strike: f64, maturity: f64 },
    CdsProtection { schedule: CdsSchedule },
    CdsAnnuity { schedule: CdsSchedule },
    CdsSpread { schedule: CdsSchedule },
    /// Real part of `E[exp(-int r) 1_{tau > T} exp(z^T X_T)]`; no discounting under `P`.
    TransformRe { z: Vec<C64>, maturity: f64 },
    TransformIm { z: Vec<C64>, maturity: f64 },
}

impl Functional {
    pub fn name(&self) -> &'static str {
        match self {
            Functional::Survival { .. } => "survival",
            Functional::Distribution { .. } => "distribution",
            Functional::Bond { .. } => "bond",
            Functional::RiskfreeBond { .. } => "riskfree-bond",
            Functional::Call { .. } => "call",
            Functional::Put { .. } => "put",
            Functional::CdsProtection { .. } => "cds-protection",
            Functional::CdsAnnuity { .. } => "cds-annuity",
            Functional::CdsSpread { .. } => "cds-spread",
            Functional::TransformRe { .. } => "transform-re",
            Functional::TransformIm { .. } => "transform-im",
        }
    }

    /// Measure the batch must be simulated under, if any.
    pub fn measure(&self) -> Option<SimMeasure> {
        match self {
            Functional::Survival { .. } | Functional::Distribution { .. } => Some(SimMeasure::Physical),
            Functional::TransformRe { .. } | Functional::TransformIm { .. } => None,
            _ => Some(SimMeasure::RiskNeutral),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n_paths: usize,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Sum in fixed block order, pairwise across blocks.
fn block_sum(v: &[f64]) -> f64 {
    fn pairwise(s: &[f64]) -> f64 {
        match s.len() {
            0 => 0.0,
            1 => s[0],
            n => pairwise(&s[..n / 2]) + pairwise(&s[n / 2..]),
        }
    }
    let blocks: Vec<f64> = v.chunks(BLOCK).map(|c| c.iter().sum()).collect();
    pairwise(&blocks)
}

fn mean_se(v: &[f64]) -> Estimate {
    let n = v.len();
    let mean = block_sum(v) / n as f64;
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = if n > 1 { block_sum(&dev) / (n - 1) as f64 } else { 0.0 };
    Estimate {
        value: mean,
        se: (var / n as f64).sqrt(),
        n_paths: n,
    }
}

fn cds_legs(batch: &PathBatch, s: &CdsSchedule) -> Result<(Vec<f64>, Vec<f64>)> {
    if s.dates[0].abs() > 1e-12 {
        return Err(Error::invalid("the batch starts at 0; the schedule must too"));
    }
    let idx = s.dates[1..].iter().map(|&t| batch.date_index(t)).collect::<Result<Vec<_>>>()?;
    let end = s.maturity();
    let nd = batch.dates.len();
    let (mut prot, mut ann) = (Vec::with_capacity(batch.n_paths()), Vec::with_capacity(batch.n_paths()));
    for p in 0..batch.n_paths() {
        prot.push(if batch.default_time[p] <= end { s.delta * batch.discount_at_default[p] } else { 0.0 });
        ann.push(
            s.dates
                .windows(2)
                .zip(&idx)
                .filter(|(w, _)| batch.survives(p, w[1]))
                .map(|(w, &k)| (w[1] - w[0]) * (-batch.int_rate[p * nd + k]).exp())
                .sum(),
        );
    }
    Ok((prot, ann))
}

/// Sample mean of the per-path payoff and its standard error.
pub fn estimate(batch: &PathBatch, functional: &Functional) -> Result<Estimate> {
    if let Some(expected) = functional.measure() {
        if expected != batch.measure {
            return Err(Error::MeasureMismatch {
                functional: functional.name(),
                expected: expected.label(),
                actual: batch.measure.label(),
            });
        }
    }
    let n = batch.n_paths();
    let nd = batch.dates.len();
    let d = batch.d;
    let per_path = |t: f64, f: &dyn Fn(usize, usize) -> f64| -> Result<Vec<f64>> {
        let k = batch.date_index(t)?;
        Ok((0..n).map(|p| if batch.survives(p, t) { f(p, k) } else { 0.0 }).collect())
    };
    let discount = |p: usize, k: usize| (-batch.int_rate[p * nd + k]).exp();
    let spot = |p: usize, k: usize| batch.state(p, k)[d - 1].exp();
    let values = match functional {
        Functional::Survival { maturity } => per_path(*maturity, &|_, _| 1.0)?,
        Functional::Distribution { level, maturity } => {
            per_path(*maturity, &|p, k| if spot(p, k) <= *level { 1.0 } else { 0.0 })?
        }
        Functional::Bond { maturity } => per_path(*maturity, &discount)?,
        Functional::RiskfreeBond { maturity } => {
            let k = batch.date_index(*maturity)?;
            (0..n).map(|p| discount(p, k)).collect()
        }
        Functional::Call { strike, maturity } => {
            per_path(*maturity, &|p, k| discount(p, k) * (spot(p, k) - strike).max(0.0))?
        }
        Functional::Put { strike, maturity } => {
            let k = batch.date_index(*maturity)?;
            (0..n)
                .map(|p| {
                    // The stock is worthless after default.
                    let s = if batch.survives(p, *maturity) { spot(p, k) } else { 0.0 };
                    discount(p, k) * (strike - s).max(0.0)
                })
                .collect()
        }
        Functional::CdsProtection { schedule } => cds_legs(batch, schedule)?.0,
        Functional::CdsAnnuity { schedule } => cds_legs(batch, schedule)?.1,
        Functional::CdsSpread { schedule } => {
            let (prot, ann) = cds_legs(batch, schedule)?;
            let (pm, am) = (mean_se(&prot), mean_se(&ann));
            let spread = pm.value / am.value;
            let resid: Vec<f64> = prot.iter().zip(&ann).map(|(p, a)| (p - spread * a) / am.value).collect();
            return Ok(Estimate {
                value: spread,
                se: mean_se(&resid).se,
                n_paths: n,
            });
        }
        Functional::TransformRe { z, maturity } | Functional::TransformIm { z, maturity } => {
            if z.len() != d {
                return Err(Error::structural(format!("transform argument must have {d} components")));
            }
            let re = matches!(functional, Functional::TransformRe { .. });
            let discounted = batch.measure == SimMeasure::RiskNeutral;
            per_path(*maturity, &|p, k| {
                let x = batch.state(p, k);
                let e: C64 = z.iter().zip(x).map(|(zi, xi)| zi * xi).sum::<C64>().exp();
                let e = if discounted { e * discount(p, k) } else { e };
                if re {
                    e.re
                } else {
                    e.im
                }
            })?
        }
    };
    Ok(mean_se(&values))
}
