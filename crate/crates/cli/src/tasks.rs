//! Task parameters shared by the subcommands and the scenario file.

use std::fmt;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use defaultable_affine::fourier::{default_maturities, default_moneyness};
use defaultable_affine::{OptionKind, Scheme, SimMeasure, SurfaceMethod, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    Validate(ValidateTask),
    VerifyMeasure(ValidateTask),
    Solve(SolveTask),
    Survival(SurvivalTask),
    Bond(BondTask),
    Cds(CdsTask),
    Option(OptionTask),
    Surface(SurfaceTask),
    Distribution(DistributionTask),
    Simulate(SimulateTask),
    Compare(CompareTask),
}

impl Task {
    /// Stem of the artifact file name.
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Validate(_) => "validate",
            Task::VerifyMeasure(_) => "verify-measure",
            Task::Solve(_) => "solve",
            Task::Survival(_) => "survival",
            Task::Bond(_) => "bond",
            Task::Cds(_) => "cds",
            Task::Option(_) => "option",
            Task::Surface(_) => "surface",
            Task::Distribution(_) => "distribution",
            Task::Simulate(_) => "simulate",
            Task::Compare(_) => "compare",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum MeasureArg {
    P,
    Q,
}

impl From<MeasureArg> for SimMeasure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::P => SimMeasure::Physical,
            MeasureArg::Q => SimMeasure::RiskNeutral,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Call,
    Put,
}

impl From<KindArg> for OptionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Call => OptionKind::Call,
            KindArg::Put => OptionKind::Put,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Direct,
    Fft,
}

impl From<MethodArg> for SurfaceMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Direct => SurfaceMethod::Direct,
            MethodArg::Fft => SurfaceMethod::Fft,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Euler,
    ExactCir,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Euler => Scheme::Euler,
            SchemeArg::ExactCir => Scheme::ExactCir,
        }
    }
}

/// Complex vector written `re,im;re,im;...` on the command line and
/// `[[re, im], ...]` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComplexVector(pub Vec<[f64; 2]>);

impl ComplexVector {
    pub fn to_complex(&self) -> Vec<C64> {
        self.0.iter().map(|[re, im]| C64::new(*re, *im)).collect()
    }
}

impl FromStr for ComplexVector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(';')
            .map(|c| {
                let parts: Vec<&str> = c.split(',').map(str::trim).collect();
                match parts.as_slice() {
                    [re, im] => Ok([
                        re.parse().map_err(|e| format!("{re}: {e}"))?,
                        im.parse().map_err(|e| format!("{im}: {e}"))?,
                    ]),
                    [re] => Ok([re.parse().map_err(|e| format!("{re}: {e}"))?, 0.0]),
                    _ => Err(format!("component `{c}` is not `re,im`")),
                }
            })
            .collect::<Result<_, _>>()
            .map(ComplexVector)
    }
}

impl fmt::Display for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|[re, im]| format!("{re},{im}")).collect();
        f.write_str(&parts.join(";"))
    }
}

fn one() -> f64 {
    1.0
}
fn quarterly() -> u32 {
    4
}
fn delta() -> f64 {
    0.6
}
fn damping_w() -> f64 {
    1.5
}
fn damping_y() -> f64 {
    -0.5
}
fn paths() -> usize {
    100_000
}
fn steps() -> usize {
    64
}
fn exact() -> SchemeArg {
    SchemeArg::ExactCir
}
fn points() -> usize {
    31
}
fn unit_dates() -> Vec<f64> {
    vec![1.0]
}
fn levels() -> Vec<f64> {
    vec![0.7, 1.0, 1.3]
}
fn strikes() -> Vec<f64> {
    vec![0.9, 1.0, 1.1]
}
fn direct() -> MethodArg {
    MethodArg::Direct
}
fn q() -> MeasureArg {
    MeasureArg::Q
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
pub struct ValidateTask {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct SolveTask {
    #[arg(long, value_enum, default_value = "q")]
    #[serde(default = "q")]
    pub measure: MeasureArg,
    /// Transform argument, `re,im` per component separated by `;`.
    #[arg(long, allow_hyphen_values = true)]
    pub z: ComplexVector,
    #[arg(long)]
    pub horizon: f64,
    /// Output times, evenly spaced on `[0, horizon]`.
    #[arg(long, default_value_t = points())]
    #[serde(default = "points")]
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct SurvivalTask {
    #[arg(long, default_value_t = one())]
    #[serde(default = "one")]
    pub maturity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct BondTask {
    #[arg(long, default_value_t = one())]
    #[serde(default = "one")]
    pub maturity: f64,
    /// Price the default-free bond instead.
    #[arg(long)]
    #[serde(default)]
    pub riskfree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct CdsTask {
    #[arg(long, default_value_t = one())]
    #[serde(default = "one")]
    pub maturity: f64,
    /// Premium payments per year.
    #[arg(long, default_value_t = quarterly())]
    #[serde(default = "quarterly")]
    pub frequency: u32,
    /// Fraction of notional paid at default.
    #[arg(long, default_value_t = delta())]
    #[serde(default = "delta")]
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct OptionTask {
    #[arg(long = "type", value_enum)]
    #[serde(rename = "type")]
    pub option_type: KindArg,
    #[arg(long)]
    pub strike: f64,
    #[arg(long, default_value_t = one())]
    #[serde(default = "one")]
    pub maturity: f64,
    #[arg(long, default_value_t = damping_w())]
    #[serde(default = "damping_w")]
    pub w: f64,
    #[arg(long, default_value_t = damping_y(), allow_hyphen_values = true)]
    #[serde(default = "damping_y")]
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct SurfaceTask {
    #[arg(long, value_delimiter = ',', default_values_t = default_maturities())]
    #[serde(default = "default_maturities")]
    pub maturities: Vec<f64>,
    /// Strike over spot.
    #[arg(long, value_delimiter = ',', default_values_t = default_moneyness())]
    #[serde(default = "default_moneyness")]
    pub moneyness: Vec<f64>,
    #[arg(long, value_enum, default_value = "direct")]
    #[serde(default = "direct")]
    pub method: MethodArg,
    #[arg(long, default_value_t = damping_w())]
    #[serde(default = "damping_w")]
    pub w: f64,
    #[arg(long, default_value_t = damping_y(), allow_hyphen_values = true)]
    #[serde(default = "damping_y")]
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct DistributionTask {
    #[arg(long, value_delimiter = ',', default_values_t = default_maturities())]
    #[serde(default = "default_maturities")]
    pub maturities: Vec<f64>,
    /// Stock price levels.
    #[arg(long, value_delimiter = ',', default_values_t = default_moneyness())]
    #[serde(default = "default_moneyness")]
    pub levels: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct SimulateTask {
    #[arg(long, value_enum, default_value = "q")]
    #[serde(default = "q")]
    pub measure: MeasureArg,
    #[arg(long, default_value_t = paths())]
    #[serde(default = "paths")]
    pub paths: usize,
    #[arg(long, default_value_t = steps())]
    #[serde(default = "steps")]
    pub steps_per_year: usize,
    #[arg(long, value_enum, default_value = "exact-cir")]
    #[serde(default = "exact")]
    pub scheme: SchemeArg,
    /// Monitoring dates; the last one is the horizon.
    #[arg(long, value_delimiter = ',', default_values_t = unit_dates())]
    #[serde(default = "unit_dates")]
    pub dates: Vec<f64>,
    /// Also write the raw batch in binary form to this file.
    #[arg(long)]
    #[serde(default)]
    pub dump: Option<std::path::PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Args)]
pub struct CompareTask {
    #[arg(long, default_value_t = paths())]
    #[serde(default = "paths")]
    pub paths: usize,
    #[arg(long, default_value_t = steps())]
    #[serde(default = "steps")]
    pub steps_per_year: usize,
    #[arg(long, value_enum, default_value = "exact-cir")]
    #[serde(default = "exact")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = one())]
    #[serde(default = "one")]
    pub maturity: f64,
    #[arg(long, value_delimiter = ',', default_values_t = strikes())]
    #[serde(default = "strikes")]
    pub strikes: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = levels())]
    #[serde(default = "levels")]
    pub levels: Vec<f64>,
    #[arg(long, default_value_t = quarterly())]
    #[serde(default = "quarterly")]
    pub frequency: u32,
    #[arg(long, default_value_t = delta())]
    #[serde(default = "delta")]
    pub delta: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_vector_syntax() {
        let z: ComplexVector = "0,0; -1.5,0;0,2".parse().unwrap();
        assert_eq!(z.0, vec![[0.0, 0.0], [-1.5, 0.0], [0.0, 2.0]]);
        assert_eq!(z.to_string(), "0,0;-1.5,0;0,2");
        assert!("1,2,3".parse::<ComplexVector>().is_err());
    }

    #[test]
    fn tasks_fill_defaults() {
        let t: Task = serde_json::from_str(r#"{"kind": "surface"}"#).unwrap();
        match t {
            Task::Surface(s) => {
                assert_eq!(s.maturities.len(), 7);
                assert_eq!(s.moneyness.len(), 13);
                assert_eq!(s.method, MethodArg::Direct);
            }
            other => panic!("{other:?}"),
        }
        let t: Task = serde_json::from_str(r#"{"kind": "option", "type": "put", "strike": 0.9}"#).unwrap();
        assert_eq!(t.kind(), "option");
        assert!(serde_json::from_str::<Task>(r#"{"kind": "option"}"#).is_err());
        assert!(serde_json::from_str::<Task>(r#"{"kind": "plot"}"#).is_err());
    }
}
