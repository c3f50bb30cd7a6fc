//! `dfa`: batch front end for the defaultable affine pricing library.
//!
//! Every subcommand is also a scenario task; `run` executes a scenario file
//! and writes one artifact per task, named `<kind>_<index>.<csv|json>`.

pub mod error;
pub mod exec;
pub mod tasks;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use defaultable_affine::{ModelDocument, PremiumDocument};
use serde::Deserialize;
use serde_json::Value;

pub use error::CliError;
pub use exec::{execute, Artifact, Settings};
use tasks::*;

#[derive(Debug, Parser)]
#[command(name = "dfa", version, about = "Pricing and simulation for affine models with default")]
pub struct Cli {
    /// Absolute tolerance of the Fourier quadrature.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for artifacts; single commands print to stdout without it.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model document: generic affine or flat Heston JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Risk premium document.
    #[arg(long)]
    pub premium: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check admissibility and, with a premium, the measure change.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Print the drift-condition residuals and premium checks.
    VerifyMeasure {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Dump the Riccati solution as CSV.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: SolveTask,
    },
    /// Survival probability under the pricing measure.
    Survival {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: SurvivalTask,
    },
    /// Defaultable or risk-free zero-coupon bond.
    Bond {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: BondTask,
    },
    /// Par spread and legs of a regular CDS.
    Cds {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: CdsTask,
    },
    /// European call or put by Fourier inversion.
    Option {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: OptionTask,
    },
    /// Put and call prices with implied vols over a maturity/moneyness grid.
    Surface {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: SurfaceTask,
    },
    /// `P(S_T <= x, tau > T)` over a grid.
    Distribution {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: DistributionTask,
    },
    /// Simulate paths and summarize them, optionally dumping them in binary.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: SimulateTask,
    },
    /// Analytic values against Monte Carlo.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        task: CompareTask,
    },
    /// Execute every task of a scenario file.
    Run { scenario: PathBuf },
}

/// `{"model": .., "premium": .., "tasks": [..]}`; `seed` and `tol` are
/// defaults that command-line flags override.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: Value,
    #[serde(default)]
    pub premium: Option<Value>,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_json(path: &Path) -> Result<Value, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn located(p: &Path, e: defaultable_affine::Error) -> CliError {
    CliError::Input(format!("{}: {e}", p.display()))
}

fn load_model(args: &ModelArgs) -> Result<(ModelDocument, Option<PremiumDocument>), CliError> {
    let model = ModelDocument::from_value(parse_json(&args.model)?).map_err(|e| located(&args.model, e))?;
    let premium = match &args.premium {
        Some(p) => Some(PremiumDocument::from_value(parse_json(p)?).map_err(|e| located(p, e))?),
        None => None,
    };
    Ok((model, premium))
}

fn write_artifact(dir: &Path, kind: &str, index: usize, a: &Artifact) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{kind}_{index}.{}", a.ext));
    std::fs::write(&path, &a.body).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Runs a scenario, writing its artifacts into `dir`. Stops at the first failing task.
pub fn run_scenario(path: &Path, dir: &Path, overrides: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let text = read(path)?;
    let sc: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let input = |e: defaultable_affine::Error| CliError::Input(format!("{}: {e}", path.display()));
    let model = ModelDocument::from_value(sc.model).map_err(input)?;
    let premium = sc.premium.map(PremiumDocument::from_value).transpose().map_err(input)?;
    let defaults = Settings::default();
    let settings = Settings {
        tol: overrides.tol.or(sc.tol).unwrap_or(defaults.tol),
        seed: overrides.seed.or(sc.seed).unwrap_or(defaults.seed),
    };
    let mut written = Vec::new();
    for (i, task) in sc.tasks.iter().enumerate() {
        let artifact = execute(task, &model, premium.as_ref(), &settings)
            .map_err(|e| annotate(e, &format!("task {i} ({})", task.kind())))?;
        written.push(write_artifact(dir, task.kind(), i, &artifact)?);
    }
    Ok(written)
}

fn annotate(e: CliError, what: &str) -> CliError {
    match e {
        CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
        CliError::Numerical { module, message } => CliError::Numerical {
            module,
            message: format!("{what}: {message}"),
        },
    }
}

fn single(cli: &Cli, model: &ModelArgs, task: Task) -> Result<(), CliError> {
    let (m, p) = load_model(model)?;
    let defaults = Settings::default();
    let settings = Settings {
        tol: cli.tol.unwrap_or(defaults.tol),
        seed: cli.seed.unwrap_or(defaults.seed),
    };
    let artifact = execute(&task, &m, p.as_ref(), &settings)?;
    match &cli.output_dir {
        Some(dir) => {
            let path = write_artifact(dir, task.kind(), 0, &artifact)?;
            println!("{}", path.display());
        }
        None => print!("{}", artifact.body),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate { model } => single(cli, model, Task::Validate(ValidateTask {})),
        Command::VerifyMeasure { model } => single(cli, model, Task::VerifyMeasure(ValidateTask {})),
        Command::Solve { model, task } => single(cli, model, Task::Solve(task.clone())),
        Command::Survival { model, task } => single(cli, model, Task::Survival(task.clone())),
        Command::Bond { model, task } => single(cli, model, Task::Bond(task.clone())),
        Command::Cds { model, task } => single(cli, model, Task::Cds(task.clone())),
        Command::Option { model, task } => single(cli, model, Task::Option(task.clone())),
        Command::Surface { model, task } => single(cli, model, Task::Surface(task.clone())),
        Command::Distribution { model, task } => single(cli, model, Task::Distribution(task.clone())),
        Command::Simulate { model, task } => single(cli, model, Task::Simulate(task.clone())),
        Command::Compare { model, task } => single(cli, model, Task::Compare(task.clone())),
        Command::Run { scenario } => {
            let dir = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            for p in run_scenario(scenario, &dir, cli)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("input error: cannot start {:?} threads: {e}", cli.threads);
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
