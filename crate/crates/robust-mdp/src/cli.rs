//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid model, 2 solver failure, 3 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use robust_mdp_core::dp::{
    self, FiniteHorizonResult, IterationReport, PiOptions, StopReason, evaluate_multichain, worst_case_kernel,
    worst_case_kernel_with,
};
use robust_mdp_core::model::ROW_SUM_TOL;
use robust_mdp_core::robustness::{self, Algorithm};
use robust_mdp_core::tv_ball::partition_support;
use robust_mdp_core::{Error, McmModel, Policy};

use crate::format::{FormatError, parse_number, read_model};
use crate::report::{
    Diagnostics, Final, IterationJson, ModelInfo, Report, RmaxJson, RunConfig, SweepRowJson, kernel_json, policy_json,
    stop_name,
};
use crate::text;

/// Environment variable overriding the default tolerance.
pub const TOL_ENV: &str = "ROBUST_MDP_TOL";

/// Name of the simulation generator, as written in reports.
pub const GENERATOR: &str = "splitmix64";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "robust-mdp", version, about = "Average-cost Markov control under total-variation kernel ambiguity")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Omit the timestamp so identical runs give identical bytes.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Unichain,
    General,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Unichain => Algorithm::Unichain,
            AlgorithmArg::General => Algorithm::General,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model file.
    Validate { model: PathBuf },
    /// Run policy iteration and print every round.
    Solve {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = AlgorithmArg::General)]
        algorithm: AlgorithmArg,
        /// Initial policy, one control per state; defaults to the first
        /// feasible control everywhere.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        g0: Option<Vec<String>>,
        /// Override the model's radius.
        #[arg(long)]
        radius: Option<String>,
        /// State whose bias is pinned to zero in single-gain evaluation;
        /// defaults to the last state.
        #[arg(long)]
        anchor: Option<String>,
    },
    /// Backward minimax recursion over a finite horizon.
    Finite {
        model: PathBuf,
        #[arg(long)]
        horizon: usize,
        /// Terminal values, one per state; zero by default.
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
        terminal: Option<Vec<String>>,
        #[arg(long)]
        radius: Option<String>,
    },
    /// Worst-case kernel for a value vector.
    WorstKernel {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true, required = true)]
        values: Vec<String>,
        #[arg(long)]
        radius: Option<String>,
    },
    /// Radius at which some policy's worst-case chain becomes reducible.
    Rmax { model: PathBuf },
    /// Solve at several radii.
    Sweep {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        radii: Vec<String>,
        #[arg(long, value_enum, default_value_t = AlgorithmArg::General)]
        algorithm: AlgorithmArg,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        g0: Option<Vec<String>>,
    },
    /// Simulate a policy under its worst-case kernel.
    ///
    /// The kernel is water-filled against the level sets of the policy's
    /// nominal bias. Draws come from SplitMix64 seeded with `--seed`.
    Simulate {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        policy: Vec<String>,
        #[arg(long)]
        horizon: u64,
        #[arg(long)]
        seed: u64,
        /// Starting state; defaults to the first state.
        #[arg(long)]
        initial: Option<String>,
        #[arg(long)]
        radius: Option<String>,
    },
}

/// A failure with its exit code.
#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Format(FormatError),
    #[error("{0}")]
    Solver(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Format(FormatError::Io { .. }) => EXIT_USAGE,
            Failure::Format(_) => EXIT_INVALID,
            Failure::Solver(_) => EXIT_SOLVER,
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn numbers(what: &str, raw: &[String]) -> Result<Vec<f64>, Failure> {
    raw.iter().map(|s| parse_number(s).map_err(|e| usage(format!("{what}: {e}")))).collect()
}

fn per_state(model: &McmModel, what: &str, raw: &[String]) -> Result<Vec<f64>, Failure> {
    let v = numbers(what, raw)?;
    if v.len() != model.n_states() {
        return Err(usage(format!("{what} needs {} values, got {}", model.n_states(), v.len())));
    }
    Ok(v)
}

fn policy(model: &McmModel, what: &str, names: Option<&[String]>) -> Result<Policy, Failure> {
    match names {
        None => Ok(model.first_feasible_policy()),
        Some(n) => model.policy_from_names(n).map_err(|e| usage(format!("{what}: {e}"))),
    }
}

fn state(model: &McmModel, what: &str, name: Option<&str>, default: usize) -> Result<usize, Failure> {
    match name {
        None => Ok(default),
        Some(n) => model.state_index(n).map_err(|e| usage(format!("{what}: {e}"))),
    }
}

fn radius_override(raw: Option<&str>) -> Result<Option<f64>, Failure> {
    let Some(s) = raw else { return Ok(None) };
    let r = parse_number(s).map_err(|e| usage(format!("--radius: {e}")))?;
    if !(0.0..=2.0).contains(&r) {
        return Err(usage(format!("--radius {r} is outside [0, 2]")));
    }
    Ok(Some(r))
}

struct Context {
    path: String,
    model: McmModel,
    config: RunConfig,
    tol: f64,
}

impl Context {
    fn report(&self, command: &str) -> Report {
        Report {
            command: command.to_string(),
            model: ModelInfo::new(&self.path, &self.model),
            config: self.config.clone(),
            iterations: Vec::new(),
            final_: Final::default(),
            diagnostics: Diagnostics::default(),
        }
    }
}

/// Loads and validates the model. An invalid model still yields a report
/// listing every issue.
fn load(
    path: &Path,
    radius: Option<&str>,
    config: RunConfig,
    tol: f64,
) -> Result<Result<Context, (Report, i32)>, Failure> {
    let mut model = read_model(path).map_err(Failure::Format)?;
    let mut config = config;
    if let Some(r) = radius_override(radius)? {
        model = model.with_radius(r);
        config.radius_override = Some(r);
    }
    let ctx = Context { path: path.display().to_string(), model, config, tol };
    if let Err(issues) = ctx.model.validate(tol) {
        let mut report = ctx.report("validate");
        report.final_.valid = Some(false);
        report.diagnostics.issues = issues.iter().map(ToString::to_string).collect();
        return Ok(Err((report, EXIT_INVALID)));
    }
    Ok(Ok(ctx))
}

fn solver(e: Error) -> Failure {
    Failure::Solver(e.to_string())
}

fn fill_solve(ctx: &Context, report: &mut Report, run: &IterationReport) -> i32 {
    let m = &ctx.model;
    report.iterations = run.iterations.iter().enumerate().map(|(i, r)| IterationJson::new(m, i, r)).collect();
    report.final_.stop_reason = Some(stop_name(run.stop_reason).to_string());
    report.final_.policy = Some(policy_json(m, &run.final_policy));
    if let Some(e) = &run.final_evaluation {
        report.final_.gain = Some((&e.gain).into());
        report.final_.bias = Some(e.bias.clone());
    }
    report.final_.residuals = run.residuals.map(Into::into);
    report.diagnostics.gain_monotone = Some(run.gain_monotone(ctx.tol));
    match run.stop_reason {
        StopReason::Converged => EXIT_OK,
        StopReason::IterationCap => {
            report.diagnostics.failure = Some(format!("no convergence within {} rounds", run.iterations.len()));
            EXIT_SOLVER
        }
        StopReason::EvaluationFailure => {
            if let Some(f) = &run.failure {
                report.diagnostics.record_failure(m, f);
            }
            report.diagnostics.advice =
                Some("the policy's chain has several recurrent classes; rerun with --algorithm general".into());
            EXIT_SOLVER
        }
    }
}

fn execute(cli: Cli, tol: f64) -> Result<(Report, i32), Failure> {
    let base = RunConfig {
        tolerance: tol,
        format: match cli.format {
            Format::Text => "text",
            Format::Json => "json",
        }
        .into(),
        deterministic: cli.deterministic,
        ..RunConfig::default()
    };

    macro_rules! load {
        ($path:expr, $radius:expr, $config:expr) => {
            match load($path, $radius, $config, tol)? {
                Ok(ctx) => ctx,
                Err(done) => return Ok(done),
            }
        };
    }

    match cli.command {
        Command::Validate { model } => {
            let ctx = load!(&model, None, base);
            let mut report = ctx.report("validate");
            report.final_.valid = Some(true);
            Ok((report, EXIT_OK))
        }
        Command::Solve { model, algorithm, g0, radius, anchor } => {
            let config =
                RunConfig { algorithm: Some(format!("{algorithm:?}").to_lowercase()), anchor: anchor.clone(), ..base };
            let mut ctx = load!(&model, radius.as_deref(), config);
            let g0 = policy(&ctx.model, "--g0", g0.as_deref())?;
            let last = ctx.model.n_states() - 1;
            let anchor = state(&ctx.model, "--anchor", anchor.as_deref(), last)?;
            ctx.config.g0 = Some(policy_json(&ctx.model, &g0));
            let options = PiOptions { anchor: Some(anchor), tie_tol: tol, ..PiOptions::default() };
            let run = robustness::run_algorithm(&ctx.model, algorithm.into(), &g0, &options).map_err(solver)?;
            let mut report = ctx.report("solve");
            let code = fill_solve(&ctx, &mut report, &run);
            Ok((report, code))
        }
        Command::Finite { model, horizon, terminal, radius } => {
            let mut ctx = load!(&model, radius.as_deref(), RunConfig { horizon: Some(horizon as u64), ..base });
            if horizon == 0 {
                return Err(usage("--horizon must be at least 1"));
            }
            let terminal = match terminal {
                Some(t) => per_state(&ctx.model, "--terminal", &t)?,
                None => vec![0.0; ctx.model.n_states()],
            };
            ctx.config.terminal = Some(terminal.clone());
            let FiniteHorizonResult { value_functions, greedy_policies, kernel_check, .. } =
                dp::finite_horizon_solve(&ctx.model, horizon, &terminal).map_err(solver)?;
            let mut report = ctx.report("finite");
            report.final_.greedy_policies = Some(greedy_policies.iter().map(|g| policy_json(&ctx.model, g)).collect());
            report.final_.value_functions = Some(value_functions);
            report.diagnostics.kernel_check = Some(kernel_check);
            Ok((report, EXIT_OK))
        }
        Command::WorstKernel { model, values, radius } => {
            let mut ctx = load!(&model, radius.as_deref(), base);
            let values = per_state(&ctx.model, "--values", &values)?;
            ctx.config.values = Some(values.clone());
            let k = worst_case_kernel(&ctx.model, &values).map_err(solver)?;
            let mut report = ctx.report("worst-kernel");
            report.final_.kernel = Some(kernel_json(&ctx.model, &k));
            Ok((report, EXIT_OK))
        }
        Command::Rmax { model } => {
            let ctx = load!(&model, None, base);
            let r = robustness::compute_rmax(&ctx.model).map_err(solver)?;
            let mut report = ctx.report("rmax");
            report.diagnostics.r_max = Some(RmaxJson::new(&ctx.model, &r));
            Ok((report, EXIT_OK))
        }
        Command::Sweep { model, radii, algorithm, g0 } => {
            let radii = numbers("--radii", &radii)?;
            if let Some(r) = radii.iter().find(|r| !(0.0..=2.0).contains(*r)) {
                return Err(usage(format!("--radii: {r} is outside [0, 2]")));
            }
            let config = RunConfig {
                algorithm: Some(format!("{algorithm:?}").to_lowercase()),
                radii: Some(radii.clone()),
                ..base
            };
            let mut ctx = load!(&model, None, config);
            let g0 = policy(&ctx.model, "--g0", g0.as_deref())?;
            ctx.config.g0 = Some(policy_json(&ctx.model, &g0));
            let options = PiOptions { tie_tol: tol, ..PiOptions::default() };
            let rows = robustness::sweep_radius(&ctx.model, &radii, algorithm.into(), &g0, &options);
            let mut report = ctx.report("sweep");
            report.diagnostics.gain_monotone = Some(robustness::sweep_is_monotone(&rows, ctx.model.n_states(), 1e-9));
            report.final_.sweep = Some(rows.iter().map(|r| SweepRowJson::new(&ctx.model, r)).collect());
            Ok((report, EXIT_OK))
        }
        Command::Simulate { model, policy: names, horizon, seed, initial, radius } => {
            let config =
                RunConfig { horizon: Some(horizon), seed: Some(seed), generator: Some(GENERATOR.into()), ..base };
            let mut ctx = load!(&model, radius.as_deref(), config);
            if horizon == 0 {
                return Err(usage("--horizon must be at least 1"));
            }
            let g = policy(&ctx.model, "--policy", Some(&names))?;
            let x0 = state(&ctx.model, "--initial", initial.as_deref(), 0)?;
            ctx.config.policy = Some(policy_json(&ctx.model, &g));
            ctx.config.initial = Some(ctx.model.states[x0].clone());
            let m = &ctx.model;
            let nominal = evaluate_multichain(&m.kernel, &g, &m.restrict_cost(&g)).map_err(solver)?;
            let k = worst_case_kernel_with(m, &partition_support(&nominal.bias)).map_err(solver)?;
            let avg = dp::simulate_average_cost(m, &g, &k, horizon, seed, x0).map_err(solver)?;
            let mut report = ctx.report("simulate");
            report.final_.policy = Some(policy_json(m, &g));
            report.final_.kernel = Some(kernel_json(m, &k));
            report.final_.average_cost = Some(avg);
            Ok((report, EXIT_OK))
        }
    }
}

fn tolerance(env: Option<&str>) -> Result<f64, Failure> {
    match env {
        None => Ok(ROW_SUM_TOL),
        Some(s) => match s.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
            _ => Err(usage(format!("{TOL_ENV}={s} is not a positive number"))),
        },
    }
}

/// Runs the command line `args` (program name first), writing the report to
/// `out` and messages to `err`. `env_tol` is the value of [`TOL_ENV`].
pub fn run<I, T>(args: I, env_tol: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let format = cli.format;
    let deterministic = cli.deterministic;
    let outcome = tolerance(env_tol).and_then(|tol| execute(cli, tol));
    match outcome {
        Ok((mut report, code)) => {
            if !deterministic {
                report.diagnostics.timestamp =
                    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).ok().map(|d| d.as_secs());
            }
            let body = match format {
                Format::Json => serde_json::to_string_pretty(&report).expect("report serialises") + "\n",
                Format::Text => text::render(&report),
            };
            let _ = out.write_all(body.as_bytes());
            if code != EXIT_OK {
                let msg = report
                    .diagnostics
                    .failure
                    .clone()
                    .or_else(|| (!report.diagnostics.issues.is_empty()).then(|| report.diagnostics.issues.join("\n")))
                    .unwrap_or_else(|| "failed".into());
                let _ = writeln!(err, "error: {msg}");
            }
            code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.code()
        }
    }
}
