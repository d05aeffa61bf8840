mod commands;
mod config;
mod expr;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nlfc::fc2d::{FcError, NormalEvaluation};
use nlfc::fcblend::Precision;
use nlfc::harness::{CaseId, HarnessError};
use nlfc::multipliers::KernelParams;
use nlfc::nlops::{ExtensionDomain, OperatorError};
use nlfc::solvers::SolverError;

use crate::commands::{Check, NuSource};
use crate::config::{ConfigError, RunConfig, Settings};
use crate::output::OutDir;

/// Nonlocal Poisson and diffusion solvers with Fourier continuation.
#[derive(Parser, Debug)]
#[command(name = "nlfc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fourier continuation of a function; a sweep reports convergence.
    Fc {
        #[command(flatten)]
        common: Common,
        /// `benchmark`, `demo` or an expression in x and y.
        #[arg(long)]
        function: Option<String>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Evaluate the Fourier multiplier.
    Multipliers(MultiplierArgs),
    /// Solve the nonlocal Poisson problem.
    Poisson {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gmres: GmresArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// March the nonlocal diffusion equation.
    Diffusion {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        time: TimeArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Convergence study over a resolution sweep.
    Converge {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gmres: GmresArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Time the operator application across resolutions.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
        /// Timed applications per resolution (the median is reported).
        #[arg(long, default_value_t = 7)]
        repeats: usize,
    },
    /// Build a blending table and write it in the embedded binary format.
    BlendGen {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 25)]
        c: usize,
        #[arg(long = "n-r", default_value_t = 6)]
        n_r: usize,
        #[arg(long, value_enum, default_value_t = PrecisionArg::DoubleDouble)]
        precision: PrecisionArg,
        /// Output file (default `blend_d{d}_c{c}_nr{n_r}.bin`).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Reference case.
    #[arg(long)]
    case: Option<CaseId>,
    /// Catalog curve: disk, kite, kite2, star5, ring, ellipse.
    #[arg(long)]
    curve: Option<String>,
    /// Curve parameter `name=value` (disk: radius; ellipse: a, b).
    #[arg(long = "curve-param", value_parser = parse_kv)]
    curve_param: Vec<(String, f64)>,
    #[arg(long)]
    delta: Option<f64>,
    /// One or more β values, comma separated.
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Interpolation points (default d + 1).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    c: Option<usize>,
    #[arg(long = "n-r")]
    n_r: Option<usize>,
    #[arg(long, conflicts_with = "n1d")]
    h: Option<f64>,
    /// Points across the unit diameter: `h = 2 / n1d`.
    #[arg(long)]
    n1d: Option<usize>,
    #[arg(long, value_enum)]
    evaluation: Option<EvaluationArg>,
    #[arg(long, value_enum)]
    extension: Option<ExtensionArg>,
    /// Worker threads for the compute kernels.
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with status 4 when an acceptance check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug, Default)]
struct GmresArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    restart: Option<usize>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Right diagonal scaling by the mean multiplier.
    #[arg(long)]
    precondition: bool,
}

#[derive(Args, Debug, Default)]
struct TimeArgs {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    /// Snapshot times, comma separated.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Poisson load f(x, y).
    #[arg(long)]
    load: Option<String>,
    /// Collar values b(x, y[, t]).
    #[arg(long)]
    collar: Option<String>,
    /// Closed-form solution, for error reports.
    #[arg(long)]
    exact: Option<String>,
    /// Diffusion initial data u₀(x, y).
    #[arg(long)]
    initial: Option<String>,
    /// Diffusion source s(x, y, t).
    #[arg(long)]
    source: Option<String>,
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    /// Increasing N₁D values, comma separated.
    #[arg(long = "sweep-n1d", value_delimiter = ',', conflicts_with = "sweep_h")]
    sweep_n1d: Option<Vec<usize>>,
    /// Decreasing step sizes, comma separated.
    #[arg(long = "sweep-h", value_delimiter = ',')]
    sweep_h: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct MultiplierArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    beta: f64,
    /// Frequencies ‖ν‖, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["nu_from_case", "grid"])]
    nu: Option<Vec<f64>>,
    /// Use the manufactured frequency of a case.
    #[arg(long = "nu-from-case", conflicts_with = "grid")]
    nu_from_case: Option<CaseId>,
    /// Lattice `nx,ny,lx,ly`; writes a binary grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvaluationArg {
    Direct,
    Interpolated,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExtensionArg {
    Collar,
    Boundary,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    Double,
    DoubleDouble,
}

fn parse_kv(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Common {
    fn overrides(&self) -> RunConfig {
        let mut c = RunConfig {
            case: self.case,
            output: self.out.clone(),
            threads: self.threads,
            ..RunConfig::default()
        };
        c.domain.curve = self.curve.clone();
        c.domain.params = self.curve_param.iter().cloned().collect();
        c.kernel.delta = self.delta;
        c.kernel.betas = (!self.beta.is_empty()).then(|| self.beta.clone());
        c.fc.d = self.d;
        c.fc.m = self.m;
        c.fc.c = self.c;
        c.fc.n_r = self.n_r;
        c.fc.h = self.h;
        c.fc.n1d = self.n1d;
        c.fc.evaluation = self.evaluation.map(|e| match e {
            EvaluationArg::Direct => NormalEvaluation::Direct,
            EvaluationArg::Interpolated => NormalEvaluation::Interpolated,
        });
        c.fc.extension = self.extension.map(|e| match e {
            ExtensionArg::Collar => ExtensionDomain::Collar,
            ExtensionArg::Boundary => ExtensionDomain::Boundary,
        });
        c
    }

    fn base(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        }
    }
}

impl GmresArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.gmres.tol = self.tol;
        c.gmres.restart = self.restart;
        c.gmres.max_iter = self.max_iter;
        c.gmres.precondition = self.precondition.then_some(true);
    }
}

impl TimeArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.time.tau = self.tau;
        c.time.t_final = self.t_final;
        c.time.snapshots = self.snapshots.clone();
    }
}

impl DataArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.problem.load = self.load.clone();
        c.problem.collar = self.collar.clone();
        c.problem.exact = self.exact.clone();
        c.problem.initial = self.initial.clone();
        c.problem.source = self.source.clone();
    }
}

impl SweepArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.study.n1d = self.sweep_n1d.clone();
        c.study.h = self.sweep_h.clone();
    }
}

/// Merge, resolve, set up threads and the output directory.
fn prepare(common: &Common, extra: impl FnOnce(&mut RunConfig), defaults: impl FnOnce(&mut RunConfig)) -> Result<(Settings, OutDir)> {
    let mut over = common.overrides();
    extra(&mut over);
    let mut cfg = common.base()?.merge(over);
    defaults(&mut cfg);
    let s = cfg.resolve()?;
    if let Some(n) = s.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut out = OutDir::create(&s.output)?;
    out.write_text("resolved-config.toml", &toml::to_string(&s.to_config())?)?;
    Ok((s, out))
}

fn no_defaults(_: &mut RunConfig) {}

/// Outcome of a command: its checks and whether `--check` was requested.
struct Outcome {
    checks: Vec<Check>,
    enforce: bool,
}

fn run(cli: Cli) -> Result<Outcome> {
    let (checks, enforce) = match cli.command {
        Command::Fc { common, function, sweep } => {
            let (s, mut out) = prepare(
                &common,
                |c| {
                    c.problem.function = function.clone();
                    sweep.apply(c);
                },
                no_defaults,
            )?;
            (commands::run_fc(&s, &mut out)?, common.check)
        }
        Command::Multipliers(a) => {
            let kernel = KernelParams::new(a.delta, a.beta).map_err(|e| ConfigError::new("kernel", e))?;
            let source = match (&a.nu, a.nu_from_case, &a.grid) {
                (Some(v), _, _) => NuSource::List(v.clone()),
                (_, Some(id), _) => NuSource::Case(id),
                (_, _, Some(g)) => {
                    if g.len() != 4 {
                        return Err(ConfigError::new("grid", "expected nx,ny,lx,ly").into());
                    }
                    let dim = |v: f64, key: &str| -> Result<usize, ConfigError> {
                        (v >= 2.0 && v.fract() == 0.0)
                            .then_some(v as usize)
                            .ok_or_else(|| ConfigError::new(key, format!("{v} is not a grid dimension")))
                    };
                    NuSource::Grid {
                        nx: dim(g[0], "grid.nx")?,
                        ny: dim(g[1], "grid.ny")?,
                        lx: g[2],
                        ly: g[3],
                    }
                }
                _ => return Err(ConfigError::new("nu", "give --nu, --nu-from-case or --grid").into()),
            };
            let mut out = a.out.as_deref().map(OutDir::create).transpose()?;
            let (csv, checks) = commands::run_multipliers(kernel, &source, out.as_mut())?;
            print!("{csv}");
            (checks, a.check)
        }
        Command::Poisson { common, gmres, data } => {
            let (s, mut out) = prepare(
                &common,
                |c| {
                    gmres.apply(c);
                    data.apply(c);
                },
                no_defaults,
            )?;
            (commands::run_poisson(&s, &mut out)?, common.check)
        }
        Command::Diffusion { common, time, data } => {
            let (s, mut out) = prepare(
                &common,
                |c| {
                    time.apply(c);
                    data.apply(c);
                },
                no_defaults,
            )?;
            (commands::run_diffusion(&s, &mut out)?, common.check)
        }
        Command::Converge {
            common,
            gmres,
            time,
            data,
            sweep,
        } => {
            let (s, mut out) = prepare(
                &common,
                |c| {
                    gmres.apply(c);
                    time.apply(c);
                    data.apply(c);
                    sweep.apply(c);
                },
                |c| {
                    if c.study.n1d.is_none() && c.study.h.is_none() {
                        let diffusion = c.case.map_or(c.problem.initial.is_some(), |id| !id.is_poisson());
                        if diffusion {
                            c.study.h = Some(vec![0.02, 0.01, 0.005]);
                        } else {
                            c.study.n1d = Some(vec![200, 300, 400]);
                        }
                    }
                },
            )?;
            (commands::run_converge(&s, &mut out)?, common.check)
        }
        Command::Bench { common, sweep, repeats } => {
            let (s, mut out) = prepare(
                &common,
                |c| sweep.apply(c),
                |c| {
                    if c.case.is_none() && c.domain.curve.is_none() {
                        c.domain.curve = Some("disk".into());
                        c.kernel.delta = c.kernel.delta.or(Some(0.4));
                        c.kernel.betas = c.kernel.betas.take().or(Some(vec![1.2]));
                    }
                    if c.study.n1d.is_none() && c.study.h.is_none() {
                        c.study.n1d = Some(vec![200, 400, 800]);
                    }
                },
            )?;
            (commands::run_bench(&s, repeats, &mut out)?, common.check)
        }
        Command::BlendGen {
            d,
            c,
            n_r,
            precision,
            out,
        } => {
            let path = out.unwrap_or_else(|| PathBuf::from(format!("blend_d{d}_c{c}_nr{n_r}.bin")));
            let precision = match precision {
                PrecisionArg::Double => Precision::Double,
                PrecisionArg::DoubleDouble => Precision::DoubleDouble,
            };
            let hash = commands::run_blend_gen(d, c, n_r, precision, &path)?;
            println!("{} {hash}", path.display());
            (Vec::new(), false)
        }
    };
    Ok(Outcome { checks, enforce })
}

fn solver_status(e: &SolverError) -> u8 {
    match e {
        SolverError::Config(_) | SolverError::Unstable { .. } | SolverError::Operator(_) => 2,
        _ => 3,
    }
}

/// 2: invalid input or setup, 3: solver failure, 1: anything else.
fn exit_status(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    if let Some(h) = e.downcast_ref::<HarnessError>() {
        return match h {
            HarnessError::Solver(s) => solver_status(s),
            _ => 2,
        };
    }
    if let Some(s) = e.downcast_ref::<SolverError>() {
        return solver_status(s);
    }
    if e.downcast_ref::<OperatorError>().is_some() || e.downcast_ref::<FcError>().is_some() {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            for c in &outcome.checks {
                eprintln!("check {}: {} {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
            }
            if outcome.enforce && outcome.checks.iter().any(|c| !c.pass) {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
