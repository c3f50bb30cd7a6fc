//! Gauss–Legendre rules and adaptive panel integration over half lines.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                // p1 = P_n(x), p0 = P_{n-1}(x)
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Shared rule of a common size.
pub fn rule(n: usize) -> &'static GaussRule {
    static R8: OnceLock<GaussRule> = OnceLock::new();
    static R32: OnceLock<GaussRule> = OnceLock::new();
    static R64: OnceLock<GaussRule> = OnceLock::new();
    match n {
        8 => R8.get_or_init(|| GaussRule::new(8)),
        32 => R32.get_or_init(|| GaussRule::new(32)),
        64 => R64.get_or_init(|| GaussRule::new(64)),
        _ => panic!("no shared Gauss-Legendre rule with {n} nodes"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Absolute tolerance on the integral.
    pub tol: f64,
    /// Width of the first panel.
    pub initial_panel: f64,
    /// Panels grow geometrically by this factor while the integrand is quiet.
    pub growth: f64,
    /// Hard truncation of the half line.
    pub u_max: f64,
    /// Maximum bisection depth when the two rules disagree on a panel.
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            initial_panel: 2.0,
            growth: 1.5,
            u_max: 65536.0,
            max_depth: 12,
        }
    }
}

impl QuadratureConfig {
    pub fn with_tol(self, tol: f64) -> Self {
        Self { tol, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    /// Integrand evaluations.
    pub nodes: usize,
    /// Upper end of the last panel.
    pub upper: f64,
}

struct Panel {
    value: f64,
    mass: f64,
    nodes: usize,
}

fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64, depth: u32, max_depth: u32) -> Panel {
    let mut coarse = 0.0;
    for (x, w) in rule(32).mapped(a, b) {
        coarse += w * f(x);
    }
    let (mut fine, mut mass) = (0.0, 0.0);
    for (x, w) in rule(64).mapped(a, b) {
        let v = f(x);
        fine += w * v;
        mass += w * v.abs();
    }
    if (fine - coarse).abs() <= tol || depth >= max_depth {
        return Panel {
            value: fine,
            mass,
            nodes: 96,
        };
    }
    let mid = (a + b) / 2.0;
    let l = panel(f, a, mid, tol / 2.0, depth + 1, max_depth);
    let r = panel(f, mid, b, tol / 2.0, depth + 1, max_depth);
    Panel {
        value: l.value + r.value,
        mass: l.mass + r.mass,
        nodes: 96 + l.nodes + r.nodes,
    }
}

/// `int_0^infinity f(u) du` for integrands that decay.
///
/// Panels are accepted when a 32- and a 64-node rule agree, bisected otherwise,
/// and the sweep stops once a panel carries less than `tol / 10` in `L1`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, cfg: &QuadratureConfig) -> Result<QuadratureResult> {
    let mut a = 0.0;
    let mut width = cfg.initial_panel;
    let mut total = 0.0;
    let mut nodes = 0;
    // Per-panel share of the tolerance; the number of panels is logarithmic in u_max.
    let panel_tol = cfg.tol / 64.0;
    loop {
        let b = (a + width).min(cfg.u_max);
        let p = panel(&mut f, a, b, panel_tol, 0, cfg.max_depth);
        if !p.value.is_finite() {
            return Err(Error::InsufficientDecay {
                u_max: b,
                last_panel: f64::INFINITY,
            });
        }
        total += p.value;
        nodes += p.nodes;
        if p.mass < cfg.tol / 10.0 {
            return Ok(QuadratureResult {
                value: total,
                nodes,
                upper: b,
            });
        }
        if b >= cfg.u_max {
            return Err(Error::InsufficientDecay {
                u_max: cfg.u_max,
                last_panel: p.mass,
            });
        }
        a = b;
        width *= cfg.growth;
    }
}

/// Composite Gauss–Legendre over consecutive intervals of `breaks`,
/// `n` nodes per interval.
pub fn composite<F: FnMut(f64) -> f64>(breaks: &[f64], n: usize, mut f: F) -> f64 {
    let r = rule(n);
    breaks
        .windows(2)
        .map(|w| r.integrate(w[0], w[1], &mut f))
        .sum()
}
