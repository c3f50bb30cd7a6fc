//! Runs one task against a model and renders its artifact.

use std::fmt::Write as _;

use defaultable_affine::credit::{cds_quote, pure_recovery_integral, PayoffBundle};
use defaultable_affine::fourier::{survival_distribution, FourierPrice};
use defaultable_affine::heston::validate_heston_preserving;
use defaultable_affine::io::affine_view;
use defaultable_affine::montecarlo::{simulate_physical, simulate_risk_neutral};
use defaultable_affine::riccati::{solve_with_tangents, MeasureFlavor};
use defaultable_affine::*;
use serde::Serialize;
use serde_json::json;
use std::result::Result;

use crate::error::CliError;
use crate::tasks::*;

/// Settings shared by every task of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    /// Absolute tolerance of the Fourier quadrature.
    pub tol: f64,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: QuadratureConfig::default().tol,
            seed: 42,
        }
    }
}

impl Settings {
    fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig::default().with_tol(self.tol)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub ext: &'static str,
    pub body: String,
}

impl Artifact {
    fn json<T: Serialize>(v: &T) -> Self {
        let mut body = serde_json::to_string_pretty(v).expect("serializable");
        body.push('\n');
        Self { ext: "json", body }
    }

    fn csv(body: String) -> Self {
        Self { ext: "csv", body }
    }
}

#[derive(Serialize)]
struct Diagnostics {
    quadrature_nodes: usize,
    riccati_tol: OdeTolerance,
    #[serde(skip_serializing_if = "Option::is_none")]
    damping: Option<f64>,
}

#[derive(Serialize)]
struct Valued<T: Serialize> {
    value: f64,
    #[serde(flatten)]
    extra: T,
    diagnostics: Diagnostics,
}

fn valued(value: f64, nodes: usize, ctx: &PricingContext) -> Valued<serde_json::Value> {
    Valued {
        value,
        extra: json!({}),
        diagnostics: Diagnostics {
            quadrature_nodes: nodes,
            riccati_tol: ctx.tol,
            damping: None,
        },
    }
}

pub fn execute(
    task: &Task,
    model: &ModelDocument,
    premium: Option<&PremiumDocument>,
    settings: &Settings,
) -> Result<Artifact, CliError> {
    match task {
        Task::Validate(_) => validate(model, premium),
        Task::VerifyMeasure(_) => verify_measure(model, premium),
        Task::Solve(t) => solve(t, model, premium),
        _ => {
            let ctx = build_context(model, premium)?;
            priced(task, &ctx, settings)
        }
    }
}

fn validate(model: &ModelDocument, premium: Option<&PremiumDocument>) -> Result<Artifact, CliError> {
    let (params, lp, rate, spec) = affine_view(model, premium)?;
    let mut report = validate_admissibility(&params)?;
    report.extend(lp.check(params.d, params.m, Clause::AffineFunctional)?);
    report.extend(rate.check(params.d, params.m, Clause::AffineFunctional)?);
    if let Some(p) = premium {
        match (model, p) {
            (ModelDocument::Heston(h), PremiumDocument::Heston(hp)) => {
                report.extend(validate_heston_preserving(h, hp)?.violations);
            }
            _ => {
                report.extend(measures::validate_premium(&params, &spec)?.violations);
                let resid = verify_drift_condition(&params, &spec, &rate, &lp)?;
                report.extend(resid.violations(ResidualReport::TOLERANCE));
            }
        }
    }
    if !report.is_ok() {
        return Err(Error::Rejected(report).into());
    }
    Ok(Artifact::json(&json!({
        "status": "admissible",
        "premium_checked": premium.is_some(),
        "d": params.d,
        "m": params.m,
    })))
}

fn verify_measure(model: &ModelDocument, premium: Option<&PremiumDocument>) -> Result<Artifact, CliError> {
    let (params, lp, rate, spec) = affine_view(model, premium)?;
    let premium_report = measures::validate_premium(&params, &spec)?;
    let resid = verify_drift_condition(&params, &spec, &rate, &lp)?;
    Ok(Artifact::json(&json!({
        "residuals": resid,
        "max_abs_residual": resid.max_abs(),
        "drift_condition_holds": resid.is_zero(),
        "premium_violations": premium_report.violations,
        "structure_preserving": premium_report.is_ok(),
    })))
}

fn solve(t: &SolveTask, model: &ModelDocument, premium: Option<&PremiumDocument>) -> Result<Artifact, CliError> {
    let ctx = build_context(model, premium)?;
    let z = t.z.to_complex();
    let (params, flavor, rate) = match t.measure {
        MeasureArg::P => (
            ctx.p_params.clone(),
            MeasureFlavor::physical(ctx.lambda_p.clone()),
            SpecAffine::zero(ctx.dim()),
        ),
        MeasureArg::Q => (ctx.q.params.clone(), ctx.q.flavor(), ctx.q.rate.clone()),
    };
    if t.points < 2 {
        return Err(CliError::Input("solve needs at least 2 output points".into()));
    }
    let sol = solve_with_tangents(&params, &flavor, &rate, &z, t.horizon, &[], ctx.tol)?;
    let mut out = String::from("t,re_phi,im_phi");
    for i in 1..=ctx.dim() {
        write!(out, ",re_psi_{i},im_psi_{i}").unwrap();
    }
    out.push('\n');
    for k in 0..t.points {
        let s = t.horizon * k as f64 / (t.points - 1) as f64;
        let (phi, psi) = sol.at(s);
        write!(out, "{s},{},{}", phi.re, phi.im).unwrap();
        for p in psi {
            write!(out, ",{},{}", p.re, p.im).unwrap();
        }
        out.push('\n');
    }
    Ok(Artifact::csv(out))
}

fn priced(task: &Task, ctx: &PricingContext, s: &Settings) -> Result<Artifact, CliError> {
    let cfg = s.quadrature();
    Ok(match task {
        Task::Survival(t) => Artifact::json(&valued(survival_probability(ctx, t.maturity)?, 0, ctx)),
        Task::Bond(t) => {
            let v = if t.riskfree {
                riskfree_bond(ctx, t.maturity)?
            } else {
                defaultable_bond(ctx, t.maturity)?
            };
            Artifact::json(&valued(v, 0, ctx))
        }
        Task::Cds(t) => {
            let sched = CdsSchedule::regular(ctx.t, t.maturity, t.frequency, t.delta)?;
            let q = cds_quote(ctx, &sched)?;
            Artifact::json(&Valued {
                value: q.spread,
                extra: json!({
                    "protection_leg": q.protection_leg,
                    "premium_annuity": q.premium_annuity,
                    "default_probability_q": pure_recovery_integral(ctx, sched.maturity(), &PayoffBundle::one(ctx.dim()), &sched.dates)?.value.re,
                }),
                diagnostics: Diagnostics {
                    quadrature_nodes: q.quadrature_nodes,
                    riccati_tol: ctx.tol,
                    damping: None,
                },
            })
        }
        Task::Option(t) => {
            let damping = DampingConfig::new(t.w, t.y)?;
            let price: FourierPrice = match t.option_type {
                KindArg::Call => call_price(ctx, t.strike, t.maturity, &damping, &cfg)?,
                KindArg::Put => put_price(ctx, t.strike, t.maturity, &damping, &cfg)?,
            };
            let discount = riskfree_bond(ctx, t.maturity)?;
            let tau = ctx.horizon(t.maturity)?;
            let iv = implied_vol(t.option_type.into(), price.value, ctx.spot(), t.strike, tau, discount).ok();
            Artifact::json(&Valued {
                value: price.value,
                extra: json!({ "implied_vol": iv, "riskfree_discount": discount }),
                diagnostics: Diagnostics {
                    quadrature_nodes: price.nodes,
                    riccati_tol: ctx.tol,
                    damping: Some(price.damping),
                },
            })
        }
        Task::Surface(t) => {
            let damping = DampingConfig::new(t.w, t.y)?;
            let rows = surface(ctx, &t.maturities, &t.moneyness, &damping, &cfg, t.method.into())?;
            let mut out = String::from("T,moneyness,put_price,call_price,implied_vol,implied_vol_default_free\n");
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.maturity, r.moneyness, r.put_price, r.call_price, r.implied_vol, r.implied_vol_default_free
                )
                .unwrap();
            }
            Artifact::csv(out)
        }
        Task::Distribution(t) => {
            let mut out = String::from("T,level,probability,survival\n");
            for &m in &t.maturities {
                let surv = survival_probability(ctx, m)?;
                for &x in &t.levels {
                    let f = survival_distribution(ctx, x, m, &cfg)?;
                    writeln!(out, "{m},{x},{f},{surv}").unwrap();
                }
            }
            Artifact::csv(out)
        }
        Task::Simulate(t) => simulate_task(t, ctx, s)?,
        Task::Compare(t) => compare(t, ctx, s)?,
        Task::Validate(_) | Task::VerifyMeasure(_) | Task::Solve(_) => unreachable!("handled before pricing"),
    })
}

fn simulate_task(t: &SimulateTask, ctx: &PricingContext, s: &Settings) -> Result<Artifact, CliError> {
    let cfg = SimConfig::new(t.paths, t.steps_per_year, s.seed, t.scheme.into())?;
    let batch = match t.measure {
        MeasureArg::P => simulate_physical(ctx, &t.dates, &cfg)?,
        MeasureArg::Q => simulate_risk_neutral(ctx, &t.dates, &cfg)?,
    };
    if let Some(path) = &t.dump {
        let file = std::fs::File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        batch.write_binary(std::io::BufWriter::new(file))?;
    }
    let mut dates = Vec::new();
    for &d in &batch.dates {
        let n_surv = (0..batch.n_paths()).filter(|&p| batch.survives(p, d)).count();
        let frac = n_surv as f64 / batch.n_paths() as f64;
        dates.push(json!({
            "date": d,
            "survival_frequency": frac,
            "standard_error": (frac * (1.0 - frac) / batch.n_paths() as f64).sqrt(),
        }));
    }
    Ok(Artifact::json(&json!({
        "measure": batch.measure,
        "config": batch.config,
        "defaults": (0..batch.n_paths()).filter(|&p| batch.defaulted(p)).count(),
        "truncations": batch.truncations,
        "dates": dates,
    })))
}

struct Row {
    quantity: &'static str,
    measure: &'static str,
    parameter: Option<f64>,
    analytic: f64,
    mc: Estimate,
}

/// Analytic values against Monte Carlo with a 3-SE pass flag.
fn compare(t: &CompareTask, ctx: &PricingContext, s: &Settings) -> Result<Artifact, CliError> {
    let cfg = SimConfig::new(t.paths, t.steps_per_year, s.seed, t.scheme.into())?;
    let qcfg = s.quadrature();
    let damping = DampingConfig::default();
    let mat = t.maturity;
    let mut rows = Vec::new();

    let pb = simulate_physical(ctx, &[mat], &cfg)?;
    rows.push(Row {
        quantity: "survival",
        measure: "P",
        parameter: None,
        analytic: survival_probability(ctx, mat)?,
        mc: estimate(&pb, &Functional::Survival { maturity: mat })?,
    });
    for &x in &t.levels {
        rows.push(Row {
            quantity: "distribution",
            measure: "P",
            parameter: Some(x),
            analytic: survival_distribution(ctx, x, mat, &qcfg)?,
            mc: estimate(&pb, &Functional::Distribution { level: x, maturity: mat })?,
        });
    }
    drop(pb);

    let sched = CdsSchedule::regular(0.0, mat, t.frequency, t.delta)?;
    let mut dates = sched.dates.clone();
    dates.push(mat);
    let qb = simulate_risk_neutral(ctx, &dates, &cfg)?;
    rows.push(Row {
        quantity: "bond",
        measure: "Q",
        parameter: None,
        analytic: defaultable_bond(ctx, mat)?,
        mc: estimate(&qb, &Functional::Bond { maturity: mat })?,
    });
    for &k in &t.strikes {
        rows.push(Row {
            quantity: "call",
            measure: "Q",
            parameter: Some(k),
            analytic: call_price(ctx, k, mat, &damping, &qcfg)?.value,
            mc: estimate(&qb, &Functional::Call { strike: k, maturity: mat })?,
        });
        rows.push(Row {
            quantity: "put",
            measure: "Q",
            parameter: Some(k),
            analytic: put_price(ctx, k, mat, &damping, &qcfg)?.value,
            mc: estimate(&qb, &Functional::Put { strike: k, maturity: mat })?,
        });
    }
    rows.push(Row {
        quantity: "cds_spread",
        measure: "Q",
        parameter: Some(t.delta),
        analytic: cds_spread(ctx, &sched)?,
        mc: estimate(&qb, &Functional::CdsSpread { schedule: sched.clone() })?,
    });

    let mut out = String::from("quantity,measure,maturity,parameter,analytic,monte_carlo,standard_error,z_score,pass\n");
    for r in rows {
        let z = if r.mc.se > 0.0 { (r.mc.value - r.analytic) / r.mc.se } else { 0.0 };
        let pass = r.mc.covers(r.analytic, 3.0);
        let param = r.parameter.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{mat},{param},{},{},{},{z},{pass}",
            r.quantity, r.measure, r.analytic, r.mc.value, r.mc.se
        )
        .unwrap();
    }
    Ok(Artifact::csv(out))
}
