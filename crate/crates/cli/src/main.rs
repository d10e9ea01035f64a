//! `choreo2c` command-line front end.
//!
//! Every output starts with the format version and the fully resolved
//! configuration. JSON outputs wrap the result in an envelope; CSV outputs
//! carry the same information on a leading `#` comment line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use choreo2c::action::QuadratureSpec;
use choreo2c::analytic::{self, PredictReport};
use choreo2c::minimize::{multistart, MinimizeOptions, MultistartReport};
use choreo2c::trajectory::PathJson;
use choreo2c::verify::{self, CampaignSummary, CircleFit, Suite};
use choreo2c::{ChoreographySystem, Error, FourierPath, ProblemParams};

const FORMAT_VERSION: &str = "choreo2c/1";
const THREADS_ENV: &str = "CHOREO2C_THREADS";

#[derive(Parser)]
#[command(
    name = "choreo2c",
    version,
    about = "Choreographies around two fixed centers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic radius and split from the force-balance condition.
    Predict(PredictArgs),
    /// Multistart descent of the reduced action.
    Minimize(MinimizeArgs),
    /// Randomized inequality, ODE and lower-bound campaigns.
    Verify(VerifyArgs),
    /// Analytic radius over a list of masses.
    Sweep(SweepArgs),
    /// Sample a minimize result as a CSV of every body.
    Export(ExportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Serialize)]
struct ParamArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    #[serde(rename = "M")]
    big_m: f64,
    #[arg(long, default_value_t = 3)]
    n: usize,
}

impl ParamArgs {
    fn params(&self) -> ProblemParams {
        ProblemParams::new(self.alpha, self.beta, self.m, self.big_m, self.n)
    }
}

#[derive(Args, Serialize)]
struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Serialize)]
struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    /// Tolerance on the radius mismatch.
    #[arg(long, default_value_t = analytic::DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct MinimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 16)]
    order: usize,
    #[arg(long, default_value_t = 512)]
    nodes: usize,
    /// Projected gradient norm at which descent stops.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict to loops with x(t + pi) = -x(t).
    #[arg(long)]
    antiperiodic: bool,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SuiteArg {
    Inequalities,
    Ode,
    Chain,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::Inequalities => vec![Suite::Inequalities],
            SuiteArg::Ode => vec![Suite::Ode],
            SuiteArg::Chain => vec![Suite::Chain],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    /// Random cases per suite.
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Comma-separated masses.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,2,4,8")]
    m: Vec<f64>,
    #[arg(long = "M", default_value_t = 1.0)]
    #[serde(rename = "M")]
    big_m: f64,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = analytic::DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ExportArgs {
    /// JSON written by `minimize`.
    input: PathBuf,
    /// Samples per body.
    #[arg(long, default_value_t = 512)]
    nodes: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: OutputArgs,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Library(Error),
    /// Output was written but some check did not pass.
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Library(e) => library_code(e),
            CliError::Verification(_) => 4,
        }
    }
}

fn library_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) => 1,
        Error::Convergence { .. } | Error::Stalled { .. } => 2,
        Error::Collision { .. } => 3,
        Error::Degenerate(_) => 4,
        Error::AtMass { source, .. } => library_code(source),
        Error::AllStartsFailed { failures } => {
            if !failures.is_empty()
                && failures
                    .iter()
                    .all(|(_, e)| matches!(e, Error::Collision { .. }))
            {
                3
            } else {
                2
            }
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Verification(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    format_version: &'static str,
    command: &'static str,
    config: &'a C,
    result: R,
}

fn json_text<T: Serialize>(value: &T) -> CliResult<String> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn csv_header<C: Serialize>(command: &str, config: &C) -> CliResult<String> {
    let config = serde_json::to_string(config).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(format!(
        "# format_version={FORMAT_VERSION} command={command} config={config}\n"
    ))
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(format!("cannot write to standard output: {e}"))),
    }
}

fn check_output(output: &OutputArgs) -> CliResult<()> {
    if let Some(parent) = output.out.as_deref().and_then(Path::parent) {
        if !parent.as_os_str().is_empty() && !parent.is_dir() {
            return Err(CliError::Config(format!(
                "directory {} does not exist",
                parent.display()
            )));
        }
    }
    Ok(())
}

fn run_predict(args: &PredictArgs) -> CliResult<()> {
    let params = args.params.params().validate()?;
    let report = analytic::predict(&params, args.tol)?;
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&Envelope {
            format_version: FORMAT_VERSION,
            command: "predict",
            config: args,
            result: report,
        })?,
        Format::Csv => {
            let r: &PredictReport = &report;
            let regime = serde_json::to_value(r.regime).unwrap_or(Value::Null);
            format!(
                "{}regime,lambda_tilde,one_plus_lambda,one_minus_lambda,r1,r2,radius,f_residual,iterations\n{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                csv_header("predict", args)?,
                regime.as_str().unwrap_or(""),
                r.lambda_tilde,
                r.one_plus_lambda,
                r.one_minus_lambda,
                r.r1,
                r.r2,
                r.radius,
                r.f_residual,
                r.iterations
            )
        }
    };
    emit(&args.output.out, &text)
}

#[derive(Serialize)]
struct MinimizeDiagnostics {
    predicted_radius: Option<f64>,
    lower_bound: Option<f64>,
    circle_fit: Option<CircleFit>,
    ode_residual: Option<f64>,
}

#[derive(Serialize)]
struct MinimizeResult {
    #[serde(flatten)]
    run: MultistartReport,
    diagnostics: MinimizeDiagnostics,
}

fn diagnostics(run: &MultistartReport, params: &ProblemParams) -> MinimizeDiagnostics {
    let predicted = analytic::predict(params, analytic::DEFAULT_TOL).ok();
    let lower_bound = match (&predicted, params.m > 0.0 && params.big_m > 0.0) {
        (Some(r), true) => analytic::lower_bound_at(params, r).ok(),
        _ => None,
    };
    MinimizeDiagnostics {
        predicted_radius: predicted.map(|r| r.radius),
        lower_bound,
        circle_fit: verify::circle_fit(&run.best.path).ok(),
        ode_residual: verify::ode_residual(&run.best.path, params).ok(),
    }
}

fn run_minimize(args: &MinimizeArgs) -> CliResult<()> {
    let params = args.params.params().validate()?;
    let opts = MinimizeOptions {
        max_iters: args.max_iters,
        grad_tol: args.tol,
        use_antiperiodic: args.antiperiodic,
        seed: args.seed,
        order: args.order,
        quad: QuadratureSpec::new(args.nodes)?,
        ..Default::default()
    };
    let run = multistart(&params, &opts, args.starts)?;
    let converged = run.best.converged;
    let grad_norm = run.best.grad_norm;
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let diagnostics = diagnostics(&run, &params);
            json_text(&Envelope {
                format_version: FORMAT_VERSION,
                command: "minimize",
                config: args,
                result: MinimizeResult { run, diagnostics },
            })?
        }
        Format::Csv => csv_header("minimize", args)? + &run.best.path.to_csv(args.nodes),
    };
    emit(&args.output.out, &text)?;
    if !converged {
        return Err(CliError::Library(Error::Convergence {
            iterations: args.max_iters,
            residual: grad_norm,
        }));
    }
    Ok(())
}

#[derive(Serialize)]
struct SuiteResult {
    suite: Suite,
    #[serde(flatten)]
    summary: CampaignSummary,
}

#[derive(Serialize)]
struct VerifyResult {
    checked: usize,
    failed: usize,
    worst_margin: f64,
    suites: Vec<SuiteResult>,
}

fn run_verify(args: &VerifyArgs) -> CliResult<()> {
    if args.paths == 0 {
        return Err(CliError::Config("--paths must be at least 1".into()));
    }
    let suites: Vec<SuiteResult> = args
        .suite
        .suites()
        .into_iter()
        .map(|suite| SuiteResult {
            suite,
            summary: verify::run_campaign(suite, args.paths, args.seed),
        })
        .collect();
    let result = VerifyResult {
        checked: suites.iter().map(|s| s.summary.checked).sum(),
        failed: suites.iter().map(|s| s.summary.failed).sum(),
        worst_margin: suites
            .iter()
            .map(|s| s.summary.worst_margin)
            .fold(f64::INFINITY, f64::min),
        suites,
    };
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&Envelope {
            format_version: FORMAT_VERSION,
            command: "verify",
            config: args,
            result: &result,
        })?,
        Format::Csv => {
            let mut text = csv_header("verify", args)? + "suite,checked,failed,worst_margin\n";
            for s in &result.suites {
                let name = serde_json::to_value(s.suite).unwrap_or(Value::Null);
                text.push_str(&format!(
                    "{},{},{},{:.17e}\n",
                    name.as_str().unwrap_or(""),
                    s.summary.checked,
                    s.summary.failed,
                    s.summary.worst_margin
                ));
            }
            text
        }
    };
    emit(&args.output.out, &text)?;
    if result.failed > 0 {
        return Err(CliError::Verification(format!(
            "{} of {} checks failed",
            result.failed, result.checked
        )));
    }
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> CliResult<()> {
    let params = ProblemParams::new(args.alpha, args.beta, 1.0, args.big_m, args.n).validate()?;
    if args.m.is_empty() {
        return Err(CliError::Config("--m needs at least one mass".into()));
    }
    let rows = analytic::radius_sweep(&params, &args.m, args.tol)?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Json => json_text(&Envelope {
            format_version: FORMAT_VERSION,
            command: "sweep",
            config: args,
            result: &rows,
        })?,
        Format::Csv => csv_header("sweep", args)? + &analytic::sweep_csv(&rows),
    };
    emit(&args.output.out, &text)
}

fn run_export(args: &ExportArgs) -> CliResult<()> {
    if args.output.format == Some(Format::Json) {
        return Err(CliError::Config("export writes CSV only".into()));
    }
    if args.nodes == 0 {
        return Err(CliError::Config("--nodes must be at least 1".into()));
    }
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.input.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{} is not JSON: {e}", args.input.display())))?;
    if doc["format_version"] != FORMAT_VERSION || doc["command"] != "minimize" {
        return Err(CliError::Config(format!(
            "{} is not a {FORMAT_VERSION} minimize output",
            args.input.display()
        )));
    }
    let path_json: PathJson = serde_json::from_value(doc["result"]["best"]["path"].clone())
        .map_err(|e| CliError::Config(format!("bad path in input: {e}")))?;
    let n = doc["config"]["n"]
        .as_u64()
        .ok_or_else(|| CliError::Config("input config lacks n".into()))?;
    let path = FourierPath::from_json(&path_json)?;
    let sys = ChoreographySystem::new(path, n as usize)?;
    let text = csv_header("export", args)? + &sys.to_csv(args.nodes);
    emit(&args.output.out, &text)
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t >= 1).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;
    log::info!("using {threads} worker threads");
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    let output = match &cli.command {
        Command::Predict(a) => &a.output,
        Command::Minimize(a) => &a.output,
        Command::Verify(a) => &a.output,
        Command::Sweep(a) => &a.output,
        Command::Export(a) => &a.output,
    };
    check_output(output)?;
    match &cli.command {
        Command::Predict(a) => run_predict(a),
        Command::Minimize(a) => run_minimize(a),
        Command::Verify(a) => run_verify(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Export(a) => run_export(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("choreo2c: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
