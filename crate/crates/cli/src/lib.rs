//! Command-line front end for batch survival analysis.
//!
//! One subcommand per estimator: the run reads a CSV sample, writes
//! canonical JSON (or a derived CSV plot table), and, when the result goes
//! to a file, a `<output>.manifest.json` recording the invocation and the
//! SHA-256 of every artifact. Reruns of a manifest's argv are
//! byte-identical, so manifests double as replay scripts.
//!
//! Exit codes: 0 success, 2 invalid input data, 3 numerical failure or
//! non-convergence, 64 command-line usage error. Errors print one
//! machine-parsable line to stderr: `error: <category>: <message>`.
//! `HAZARDFORGE_THREADS` caps internal parallelism; results do not depend
//! on it.

use clap::{Args, Parser, Subcommand, ValueEnum};
use hazardforge_core::data::{RightCensoredRecord, RightCensoredSample};
use hazardforge_core::diagnostics::{
    andersen_plot_data, arjas_plot_data, cox_snell, martingale_residuals,
};
use hazardforge_core::error::Error as CoreError;
use hazardforge_core::io::{
    format_csv_f64, read_interval_censored, read_multistate, read_pairs, read_right_censored,
    read_right_censored_with, write_multistate, write_right_censored, RightCensoredReadOptions,
};
use hazardforge_core::kernel::Kernel;
use hazardforge_core::logrank::{k_sample_logrank, stratified_logrank, TestResult, WeightSpec};
use hazardforge_core::multistate::{aalen_johansen, competing_risks_cif, excess_mortality};
use hazardforge_core::nonparam::{
    dabrowska, kaplan_meier, nelson_aalen, pointwise_ci, simultaneous_band, smoothed_hazard, Band,
    BandSpec, BandType, CurveEstimate, CurveKind, SampledCurve, Transform,
};
use hazardforge_core::npmle::{turnbull_em, turnbull_intervals};
use hazardforge_core::regress::{
    aalen_additive, aalen_smoothed_coefficients, beran_conditional, buckley_james, cox_fit,
    parametric_fit, smoothed_baseline, BJOptions, CoxFit, CoxOptions, Family, ParametricOptions,
};
use hazardforge_core::simlab::{
    simulate_markov, simulate_right_censored, CensoringLaw, CovariateLaw, EventLaw, MarkovSpec,
    ModelSpec, SimConfig,
};
use hazardforge_core::stats::normal_cdf;
use hazardforge_core::step::StepFunction;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Parses argv (program name included) and runs one subcommand.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv.iter().map(String::as_str)) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    let line = e
                        .to_string()
                        .lines()
                        .next()
                        .unwrap_or("invalid arguments")
                        .trim_start_matches("error: ")
                        .to_string();
                    eprintln!("error: usage: {line}");
                    64
                }
            };
        }
    };
    match execute(&cli.command, &argv[1..]) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: usage: {msg}");
            64
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            match e {
                CoreError::Numerical(_) | CoreError::NonConvergence(_) => 3,
                _ => 2,
            }
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(CoreError),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(CoreError::Io(e))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

type CliResult<T> = Result<T, Failure>;

/// Record of one completed run, written next to the primary artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<String>,
    /// Effective option values after defaults were applied.
    pub options: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub output: String,
    /// Artifact path -> SHA-256 of its bytes.
    pub checksums: BTreeMap<String, String>,
    /// The argv (after the program name) that produced the artifacts;
    /// rerunning it reproduces them byte for byte.
    pub argv: Vec<String>,
}

#[derive(Parser)]
#[command(
    name = "hazardforge",
    version,
    about = "Survival analysis from counting processes: estimators, tests, regression, diagnostics, simulation",
    after_help = "Exit codes: 0 ok, 2 invalid data, 3 numerical failure, 64 usage.\n\
                  HAZARDFORGE_THREADS caps worker threads (results are identical at any setting).\n\
                  With --output PATH, results land in PATH and a replayable PATH.manifest.json appears beside it."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nelson-Aalen cumulative hazard, optionally smoothed to a rate
    Na(CurveArgs),
    /// Kaplan-Meier survival curve
    Km(CurveArgs),
    /// Aalen-Johansen transition probabilities for a multi-state sample
    Aj(AjArgs),
    /// Competing-risks cumulative incidence per cause
    Cif(CifArgs),
    /// Excess mortality against a known background hazard rate
    Excess(ExcessArgs),
    /// Bivariate survival surface for paired times
    Dabrowska(DabrowskaArgs),
    /// Interval-censored survival masses by self-consistency EM
    Turnbull(TurnbullArgs),
    /// Weighted log-rank test across groups (optionally stratified)
    Logrank(LogrankArgs),
    /// Proportional-hazards fit with the Breslow baseline
    Cox(CoxArgs),
    /// Additive-hazards cumulative coefficient paths
    Aalen(AalenArgs),
    /// Buckley-James censored least squares on log time
    Bj(BjArgs),
    /// Kernel-conditional cumulative hazard at a covariate value
    Beran(BeranArgs),
    /// Parametric hazard fit (exponential or Weibull)
    Parametric(ParametricArgs),
    /// Martingale, deviance, and Cox-Snell residuals from a Cox fit
    Residuals(ResidualsArgs),
    /// Draw a synthetic sample from a fully specified law
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct OutArgs {
    /// Write results here (enables the manifest); stdout when omitted
    #[arg(long)]
    #[serde(skip_serializing)]
    output: Option<PathBuf>,
    /// json is canonical; csv is a derived plot table where defined
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BandChoice {
    None,
    Ep,
    Hw,
}

fn parse_transform(s: &str) -> Result<Transform, String> {
    Transform::from_str(s)
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    Kernel::from_str(s)
}

fn parse_event_law(s: &str) -> Result<EventLaw, String> {
    EventLaw::from_str(s).map_err(|e| e.to_string())
}

fn parse_censoring_law(s: &str) -> Result<CensoringLaw, String> {
    CensoringLaw::from_str(s).map_err(|e| e.to_string())
}

fn parse_covariate_law(s: &str) -> Result<CovariateLaw, String> {
    CovariateLaw::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct CurveArgs {
    /// CSV with columns time,status[,group][,covariates...]
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// Pointwise confidence level
    #[arg(long, default_value_t = 0.95)]
    conf_level: f64,
    /// Scale for the pointwise intervals
    #[arg(long, default_value = "linear", value_parser = parse_transform)]
    transform: Transform,
    /// Simultaneous band family over --band-interval
    #[arg(long, value_enum, default_value_t = BandChoice::None)]
    band: BandChoice,
    /// Band interval endpoints
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    band_interval: Option<Vec<f64>>,
    /// Seed for the Monte Carlo band critical value
    #[arg(long)]
    #[serde(skip_serializing)]
    seed: Option<u64>,
    /// Kernel bandwidth for the smoothed hazard rate (na only)
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value = "epanechnikov", value_parser = parse_kernel)]
    kernel: Kernel,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct AjArgs {
    /// CSV with columns id,time,from,to (to = -1 marks censoring)
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// Number of states; inferred from the data when omitted
    #[arg(long)]
    n_states: Option<usize>,
    /// Report P(s, t) from this start time
    #[arg(long, default_value_t = 0.0)]
    from_time: f64,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct CifArgs {
    /// CSV per the right-censored schema; events carry a cause label
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// Column holding the cause label (default: group)
    #[arg(long)]
    cause_col: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ExcessArgs {
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// Known background hazard rate shared by every subject
    #[arg(long)]
    background_rate: f64,
    /// Quadrature step (default: last observed time / 256)
    #[arg(long)]
    step: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct DabrowskaArgs {
    /// CSV with columns t1,status1,t2,status2
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct TurnbullArgs {
    /// CSV with columns left,right ((L, R] intervals, inf allowed)
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// EM stops when masses move less than this in sup-norm
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum WeightChoice {
    Logrank,
    Wilcoxon,
    Fh,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct LogrankArgs {
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// Column holding the group label (default: group)
    #[arg(long)]
    group_col: Option<String>,
    /// Column splitting the sample into independent strata
    #[arg(long)]
    strata_col: Option<String>,
    #[arg(long, value_enum, default_value_t = WeightChoice::Logrank)]
    weight: WeightChoice,
    /// Fleming-Harrington exponent (with --weight fh)
    #[arg(long)]
    rho: Option<f64>,
    /// Count events up to this time only (default: all)
    #[arg(long)]
    horizon: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct CoxArgs {
    /// CSV with columns time,status,covariates...
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// Newton stops when the score sup-norm falls below this
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Kernel bandwidth for a smoothed baseline hazard
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value = "epanechnikov", value_parser = parse_kernel)]
    kernel: Kernel,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct AalenArgs {
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// Kernel bandwidth for smoothed coefficient rates
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value = "epanechnikov", value_parser = parse_kernel)]
    kernel: Kernel,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct BjArgs {
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Fraction of each least-squares update applied per iteration
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct BeranArgs {
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// Covariate value the hazard is conditioned on
    #[arg(long, allow_hyphen_values = true)]
    z0: f64,
    #[arg(long)]
    bandwidth: f64,
    #[arg(long, default_value = "epanechnikov", value_parser = parse_kernel)]
    kernel: Kernel,
    #[arg(long, default_value_t = 0.95)]
    conf_level: f64,
    #[arg(long, default_value = "linear", value_parser = parse_transform)]
    transform: Transform,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::from_str(s)
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ParametricArgs {
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    /// exponential or weibull
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Pin the Weibull shape instead of estimating it
    #[arg(long)]
    fix_shape: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ResidualsArgs {
    #[arg(long)]
    #[serde(skip_serializing)]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Column of stratum labels for observed-vs-expected paths
    #[arg(long)]
    strata_col: Option<String>,
    /// Two-level column: fit each level separately and pair the baselines
    #[arg(long)]
    andersen_col: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelChoice {
    None,
    Cox,
    Aft,
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct SimulateArgs {
    /// Number of subjects (paths for --markov)
    #[arg(long)]
    n: usize,
    /// RNG seed; required so every sample is reproducible
    #[arg(long)]
    #[serde(skip_serializing)]
    seed: u64,
    /// Replicate lane within the seed
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Baseline event law: exp:RATE or weibull:SHAPE,SCALE
    #[arg(long, default_value = "exp:1", value_parser = parse_event_law)]
    event: EventLaw,
    /// Censoring law: none, exp:RATE, uniform:UPPER, or admin:TAU
    #[arg(long, default_value = "none", value_parser = parse_censoring_law)]
    censor: CensoringLaw,
    /// Covariate law: none, bernoulli:P, or normal:DIM
    /// (default: standard normals matching --beta under a model)
    #[arg(long, value_parser = parse_covariate_law)]
    covariates: Option<CovariateLaw>,
    /// How covariates act on the event time
    #[arg(long, value_enum, default_value_t = ModelChoice::None)]
    model: ModelChoice,
    /// Model coefficients, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta: Option<Vec<f64>>,
    /// AFT log-time scale (default 1)
    #[arg(long)]
    sigma: Option<f64>,
    /// Markov rate matrix, rows separated by ';': "-1,1;0,0"
    #[arg(long, allow_hyphen_values = true)]
    markov: Option<String>,
    /// Observation horizon for --markov paths
    #[arg(long)]
    horizon: Option<f64>,
    /// Write the sample CSV here; stdout when omitted
    #[arg(long)]
    #[serde(skip_serializing)]
    output: Option<PathBuf>,
}

/// One subcommand's results: the canonical JSON report plus, where a flat
/// table makes sense, a derived CSV view.
struct Rendered {
    report: Value,
    csv: Option<String>,
}

struct Meta {
    name: &'static str,
    inputs: Vec<String>,
    output: Option<PathBuf>,
    format: Format,
    seed: Option<u64>,
    options: BTreeMap<String, Value>,
}

fn options_map<T: Serialize>(args: &T) -> BTreeMap<String, Value> {
    match serde_json::to_value(args) {
        Ok(Value::Object(map)) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

fn meta(command: &Command) -> Meta {
    let path_str = |p: &PathBuf| p.display().to_string();
    match command {
        Command::Na(a) | Command::Km(a) => Meta {
            name: if matches!(command, Command::Na(_)) { "na" } else { "km" },
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: a.seed,
            options: options_map(a),
        },
        Command::Aj(a) => Meta {
            name: "aj",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Cif(a) => Meta {
            name: "cif",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Excess(a) => Meta {
            name: "excess",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Dabrowska(a) => Meta {
            name: "dabrowska",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Turnbull(a) => Meta {
            name: "turnbull",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Logrank(a) => Meta {
            name: "logrank",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Cox(a) => Meta {
            name: "cox",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Aalen(a) => Meta {
            name: "aalen",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Bj(a) => Meta {
            name: "bj",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Beran(a) => Meta {
            name: "beran",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Parametric(a) => Meta {
            name: "parametric",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Residuals(a) => Meta {
            name: "residuals",
            inputs: vec![path_str(&a.input)],
            output: a.out.output.clone(),
            format: a.out.format,
            seed: None,
            options: options_map(a),
        },
        Command::Simulate(a) => Meta {
            name: "simulate",
            inputs: vec![],
            output: a.output.clone(),
            format: Format::Csv,
            seed: Some(a.seed),
            options: options_map(a),
        },
    }
}

fn execute(command: &Command, argv_tail: &[String]) -> CliResult<()> {
    let rendered = dispatch(command)?;
    deliver(meta(command), rendered, argv_tail)
}

fn dispatch(command: &Command) -> CliResult<Rendered> {
    match command {
        Command::Na(a) => run_curve(CurveKind::CumulativeHazard, a),
        Command::Km(a) => run_curve(CurveKind::Survival, a),
        Command::Aj(a) => run_aj(a),
        Command::Cif(a) => run_cif(a),
        Command::Excess(a) => run_excess(a),
        Command::Dabrowska(a) => run_dabrowska(a),
        Command::Turnbull(a) => run_turnbull(a),
        Command::Logrank(a) => run_logrank(a),
        Command::Cox(a) => run_cox(a),
        Command::Aalen(a) => run_aalen(a),
        Command::Bj(a) => run_bj(a),
        Command::Beran(a) => run_beran(a),
        Command::Parametric(a) => run_parametric(a),
        Command::Residuals(a) => run_residuals(a),
        Command::Simulate(a) => run_simulate(a),
    }
}

fn deliver(meta: Meta, rendered: Rendered, argv_tail: &[String]) -> CliResult<()> {
    let bytes = match meta.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&rendered.report)
                .expect("reports hold only plain JSON data");
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => rendered
            .csv
            .ok_or_else(|| {
                Failure::Core(CoreError::validation(format!(
                    "no csv view is defined for {}; JSON is the canonical output",
                    meta.name
                )))
            })?
            .into_bytes(),
    };
    match &meta.output {
        None => print!("{}", String::from_utf8_lossy(&bytes)),
        Some(path) => {
            std::fs::write(path, &bytes)?;
            let out_name = path.display().to_string();
            let manifest = RunManifest {
                subcommand: meta.name.to_string(),
                inputs: meta.inputs,
                options: meta.options,
                seed: meta.seed,
                output: out_name.clone(),
                checksums: BTreeMap::from([(out_name.clone(), sha256_hex(&bytes))]),
                argv: argv_tail.to_vec(),
            };
            let mut mj = serde_json::to_string_pretty(&manifest)
                .expect("the manifest holds only plain JSON data");
            mj.push('\n');
            std::fs::write(format!("{out_name}.manifest.json"), mj)?;
        }
    }
    Ok(())
}

/// Lowercase hex SHA-256, the digest used in manifests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").expect("writing to a string cannot fail");
    }
    hex
}

fn csv_field(v: f64) -> String {
    format_csv_f64(v)
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(csv_field).unwrap_or_default()
}

/// na and km: the curve, pointwise intervals, and optional band/smoothing.
fn run_curve(kind: CurveKind, args: &CurveArgs) -> CliResult<Rendered> {
    let sample = read_right_censored(&args.input)?;
    let curve = match kind {
        CurveKind::CumulativeHazard => nelson_aalen(&sample)?,
        CurveKind::Survival => kaplan_meier(&sample)?,
    };
    let ci = pointwise_ci(&curve, args.conf_level, args.transform)?;
    let band = match args.band {
        BandChoice::None => {
            if args.band_interval.is_some() {
                return Err(usage("--band-interval needs --band ep or --band hw"));
            }
            None
        }
        BandChoice::Ep | BandChoice::Hw => {
            let band_type = if args.band == BandChoice::Ep {
                BandType::EqualPrecision
            } else {
                BandType::HallWellner
            };
            let interval = args
                .band_interval
                .as_ref()
                .ok_or_else(|| usage("--band needs --band-interval LO HI"))?;
            let seed = args.seed.ok_or_else(|| {
                usage("the band critical value is Monte Carlo; pass an explicit --seed")
            })?;
            let spec = BandSpec::new(band_type, args.conf_level, interval[0], interval[1], seed);
            Some(simultaneous_band(&curve, &spec)?)
        }
    };
    let smoothed = match (kind, args.bandwidth) {
        (_, None) => None,
        (CurveKind::Survival, Some(_)) => {
            return Err(usage("--bandwidth smooths the hazard rate; use the na subcommand"));
        }
        (CurveKind::CumulativeHazard, Some(b)) => {
            Some(smoothed_hazard(&curve, b, args.kernel, curve.times())?)
        }
    };
    curve_rendered(&curve, args.conf_level, args.transform, &ci.lo, &ci.hi, band, smoothed)
}

fn curve_kind_name(kind: CurveKind) -> &'static str {
    match kind {
        CurveKind::Survival => "survival",
        CurveKind::CumulativeHazard => "cumulative_hazard",
    }
}

fn curve_rendered(
    curve: &CurveEstimate,
    conf_level: f64,
    transform: Transform,
    lo: &[Option<f64>],
    hi: &[Option<f64>],
    band: Option<Band>,
    smoothed: Option<SampledCurve>,
) -> CliResult<Rendered> {
    let times = curve.times();
    let estimate = curve.estimate.values_at_jumps();
    let variance = curve.variance.values_at_jumps();
    let sigma2 = curve.sigma2.values_at_jumps();

    #[derive(Serialize)]
    struct CurveReport<'a> {
        kind: &'static str,
        n: usize,
        times: &'a [f64],
        estimate: &'a [f64],
        variance: &'a [f64],
        sigma2: &'a [f64],
        last_observed: f64,
        exhausted_at: Option<f64>,
        conf_level: f64,
        transform: Transform,
        lo: &'a [Option<f64>],
        hi: &'a [Option<f64>],
        band: &'a Option<Band>,
        smoothed_hazard: &'a Option<SampledCurve>,
    }
    let report = serde_json::to_value(CurveReport {
        kind: curve_kind_name(curve.kind),
        n: curve.n,
        times,
        estimate: &estimate,
        variance: &variance,
        sigma2: &sigma2,
        last_observed: curve.last_observed,
        exhausted_at: curve.exhausted_at,
        conf_level,
        transform,
        lo,
        hi,
        band: &band,
        smoothed_hazard: &smoothed,
    })
    .expect("reports hold only plain JSON data");

    let mut csv = String::from("time,estimate,variance,sigma2,lo,hi");
    if band.is_some() {
        csv.push_str(",band_lo,band_hi");
    }
    csv.push('\n');
    for (i, &t) in times.iter().enumerate() {
        let _ = write!(
            csv,
            "{},{},{},{},{},{}",
            csv_field(t),
            csv_field(estimate[i]),
            csv_field(variance[i]),
            csv_field(sigma2[i]),
            csv_opt(lo[i]),
            csv_opt(hi[i]),
        );
        if let Some(b) = &band {
            let j = b.times.partition_point(|&u| u < t);
            if j < b.times.len() && b.times[j] == t {
                let _ = write!(csv, ",{},{}", csv_field(b.lo[j]), csv_field(b.hi[j]));
            } else {
                csv.push_str(",,");
            }
        }
        csv.push('\n');
    }
    Ok(Rendered { report, csv: Some(csv) })
}

/// Scans the multi-state schema for the largest state index.
fn infer_states(path: &Path) -> CliResult<usize> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::validation(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let (from_idx, to_idx) = match (
        columns.iter().position(|c| *c == "from"),
        columns.iter().position(|c| *c == "to"),
    ) {
        (Some(f), Some(t)) => (f, t),
        _ => {
            return Err(Failure::Core(CoreError::validation(
                "no from/to columns to infer the state count; pass --n-states",
            )));
        }
    };
    let mut max_state = -1i64;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        for &idx in &[from_idx, to_idx] {
            if let Some(v) = fields.get(idx).and_then(|f| f.trim().parse::<i64>().ok()) {
                max_state = max_state.max(v);
            }
        }
    }
    if max_state < 0 {
        return Err(Failure::Core(CoreError::validation(
            "no states in the file; pass --n-states",
        )));
    }
    Ok(max_state as usize + 1)
}

fn run_aj(args: &AjArgs) -> CliResult<Rendered> {
    let n_states = match args.n_states {
        Some(k) => k,
        None => infer_states(&args.input)?,
    };
    let history = read_multistate(&args.input, n_states)?;
    let est = aalen_johansen(&history)?;
    let s = args.from_time;

    // running product integral P(s, t) = prod (I + dA) over jumps in (s, t]
    let mut p = DMatrix::<f64>::identity(n_states, n_states);
    let eye = DMatrix::<f64>::identity(n_states, n_states);
    let mut times = Vec::new();
    let mut matrices: Vec<Vec<Vec<f64>>> = Vec::new();
    for (i, &t) in est.a_hat.jump_times().iter().enumerate() {
        if t <= s {
            continue;
        }
        p = &p * (&eye + &est.a_hat.jumps()[i]);
        times.push(t);
        matrices.push(
            (0..n_states)
                .map(|h| (0..n_states).map(|j| p[(h, j)]).collect())
                .collect(),
        );
    }

    let report = json!({
        "n_states": n_states,
        "n_subjects": est.n_subjects,
        "from_time": s,
        "times": times,
        "matrices": matrices,
    });
    let mut csv = String::from("time,from,to,p\n");
    for (t, m) in times.iter().zip(&matrices) {
        for (h, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let _ = writeln!(csv, "{},{h},{j},{}", csv_field(*t), csv_field(v));
            }
        }
    }
    Ok(Rendered { report, csv: Some(csv) })
}

fn run_cif(args: &CifArgs) -> CliResult<Rendered> {
    let opts = RightCensoredReadOptions {
        group_col: args.cause_col.clone(),
        strata_col: None,
    };
    let sample = read_right_censored_with(&args.input, &opts)?.sample;
    let est = competing_risks_cif(&sample)?;
    let times = est.overall_survival.jump_times().to_vec();
    let survival = est.overall_survival.values_at_jumps();
    let cif: Vec<Vec<f64>> = est.cif.iter().map(StepFunction::values_at_jumps).collect();

    let report = json!({
        "n": est.n,
        "causes": est.causes,
        "times": times,
        "overall_survival": survival,
        "cif": cif,
    });
    let mut csv = String::from("time,overall_survival");
    for c in &est.causes {
        let _ = write!(csv, ",cif_{c}");
    }
    csv.push('\n');
    for (i, &t) in times.iter().enumerate() {
        let _ = write!(csv, "{},{}", csv_field(t), csv_field(survival[i]));
        for series in &cif {
            let _ = write!(csv, ",{}", csv_field(series[i]));
        }
        csv.push('\n');
    }
    Ok(Rendered { report, csv: Some(csv) })
}

fn run_excess(args: &ExcessArgs) -> CliResult<Rendered> {
    if !(args.background_rate >= 0.0) || !args.background_rate.is_finite() {
        return Err(Failure::Core(CoreError::validation(format!(
            "background rate must be finite and nonnegative, got {}",
            args.background_rate
        ))));
    }
    let sample = read_right_censored(&args.input)?;
    let last = sample.records().iter().map(|r| r.time).fold(0.0, f64::max);
    let step = args.step.unwrap_or(last / 256.0);
    let rate = args.background_rate;
    let est = excess_mortality(&sample, &|_, _| rate, step)?;

    let report = json!({
        "n": sample.n(),
        "background_rate": rate,
        "step": step,
        "times": est.times,
        "gamma": est.gamma,
        "corrected_survival": est.corrected_survival,
        "sigma2": est.sigma2,
    });
    let mut csv = String::from("time,gamma,corrected_survival,sigma2\n");
    for (i, &t) in est.times.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            csv_field(t),
            csv_field(est.gamma[i]),
            csv_field(est.corrected_survival[i]),
            csv_field(est.sigma2[i]),
        );
    }
    Ok(Rendered { report, csv: Some(csv) })
}

fn run_dabrowska(args: &DabrowskaArgs) -> CliResult<Rendered> {
    let pairs = read_pairs(&args.input)?;
    let est = dabrowska(&pairs)?;
    let report = serde_json::to_value(&est).expect("reports hold only plain JSON data");
    let mut csv = String::from("s,t,surface\n");
    for (i, &s) in est.grid_s.iter().enumerate() {
        for (j, &t) in est.grid_t.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                csv_field(s),
                csv_field(t),
                csv_field(est.surface[i][j])
            );
        }
    }
    Ok(Rendered { report, csv: Some(csv) })
}

fn run_turnbull(args: &TurnbullArgs) -> CliResult<Rendered> {
    let sample = read_interval_censored(&args.input)?;
    let problem = turnbull_intervals(&sample)?;
    let solution = turnbull_em(&problem, args.tol, args.max_iter)?;
    if !solution.converged {
        return Err(Failure::Core(CoreError::non_convergence(format!(
            "EM did not reach tol {} within {} iterations",
            args.tol, args.max_iter
        ))));
    }
    let masses = solution.full_masses(problem.n_columns());
    let columns: Vec<Value> = (0..problem.n_columns())
        .map(|j| {
            let (left, right) = problem.column_interval(j);
            json!({
                "left": left,
                "right": right,
                "mass": masses[j],
                "support": solution.support_columns.contains(&j),
            })
        })
        .collect();
    let report = json!({
        "n": problem.n(),
        "columns": columns,
        "loglik": solution.loglik,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "certificate": serde_json::to_value(&solution.certificate)
            .expect("reports hold only plain JSON data"),
    });
    let mut csv = String::from("left,right,mass\n");
    for j in 0..problem.n_columns() {
        let (left, right) = problem.column_interval(j);
        let _ = writeln!(
            csv,
            "{},{},{}",
            csv_field(left),
            csv_field(right),
            csv_field(masses[j])
        );
    }
    Ok(Rendered { report, csv: Some(csv) })
}

/// Splits records into per-stratum samples, labels ascending.
fn split_strata(
    sample: &RightCensoredSample,
    labels: &[i64],
) -> CliResult<Vec<RightCensoredSample>> {
    let mut by_label: BTreeMap<i64, Vec<RightCensoredRecord>> = BTreeMap::new();
    for (r, &l) in sample.records().iter().zip(labels) {
        by_label.entry(l).or_default().push(r.clone());
    }
    Ok(by_label
        .into_values()
        .map(RightCensoredSample::new)
        .collect::<Result<Vec<_>, _>>()?)
}

fn run_logrank(args: &LogrankArgs) -> CliResult<Rendered> {
    let weight = match (args.weight, args.rho) {
        (WeightChoice::Logrank, None) => WeightSpec::Logrank,
        (WeightChoice::Wilcoxon, None) => WeightSpec::WilcoxonTotalRisk,
        (WeightChoice::Fh, Some(rho)) => WeightSpec::FlemingHarrington { rho },
        (WeightChoice::Fh, None) => return Err(usage("--weight fh needs --rho")),
        (_, Some(_)) => return Err(usage("--rho applies only with --weight fh")),
    };
    let opts = RightCensoredReadOptions {
        group_col: args.group_col.clone(),
        strata_col: args.strata_col.clone(),
    };
    let file = read_right_censored_with(&args.input, &opts)?;
    let horizon = args.horizon.unwrap_or(f64::INFINITY);
    let (test_name, result): (&str, TestResult) = match &file.strata {
        Some(labels) => {
            let strata = split_strata(&file.sample, labels)?;
            ("stratified", stratified_logrank(&strata, weight, horizon)?)
        }
        None => ("k_sample", k_sample_logrank(&file.sample, weight, horizon)?),
    };
    let report = json!({
        "test": test_name,
        "weight": serde_json::to_value(weight).expect("reports hold only plain JSON data"),
        "horizon": horizon,
        "result": serde_json::to_value(&result).expect("reports hold only plain JSON data"),
    });
    Ok(Rendered { report, csv: None })
}

/// Standard errors from the inverse information; None when singular.
fn wald_columns(fit: &CoxFit) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let d = fit.beta.len();
    if d == 0 {
        return (Some(vec![]), Some(vec![]), Some(vec![]));
    }
    let info = DMatrix::from_fn(d, d, |i, j| fit.information[i][j]);
    let Some(cov) = info.try_inverse() else {
        return (None, None, None);
    };
    let se: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
    let z: Vec<f64> = fit.beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p: Vec<f64> = z
        .iter()
        .map(|&z| 2.0 * normal_cdf(-z.abs()))
        .collect();
    (Some(se), Some(z), Some(p))
}

fn cox_options(tol: f64, max_iter: usize) -> CoxOptions {
    CoxOptions { tol, max_iter }
}

fn require_converged(converged: bool, what: &str, max_iter: usize) -> CliResult<()> {
    if converged {
        Ok(())
    } else {
        Err(Failure::Core(CoreError::non_convergence(format!(
            "{what} did not converge within {max_iter} iterations"
        ))))
    }
}

fn run_cox(args: &CoxArgs) -> CliResult<Rendered> {
    let sample = read_right_censored(&args.input)?;
    let fit = cox_fit(&sample, cox_options(args.tol, args.max_iter))?;
    require_converged(fit.converged, "the partial-likelihood Newton iteration", args.max_iter)?;
    let (se, z, p) = wald_columns(&fit);
    let smoothed = match args.bandwidth {
        None => None,
        Some(b) => Some(smoothed_baseline(&fit, b, args.kernel, fit.breslow.jump_times())?),
    };
    let report = json!({
        "n": sample.n(),
        "n_events": sample.n_events(),
        "beta": fit.beta,
        "se": se,
        "z": z,
        "p_value": p,
        "information": fit.information,
        "loglik_path": fit.loglik_path,
        "iterations": fit.loglik_path.len() - 1,
        "converged": fit.converged,
        "score_norm": fit.score_norm,
        "baseline": {
            "times": fit.breslow.jump_times(),
            "values": fit.breslow.values_at_jumps(),
        },
        "smoothed_baseline": smoothed,
    });
    let mut csv = String::from("time,cumulative_hazard\n");
    let values = fit.breslow.values_at_jumps();
    for (i, &t) in fit.breslow.jump_times().iter().enumerate() {
        let _ = writeln!(csv, "{},{}", csv_field(t), csv_field(values[i]));
    }
    Ok(Rendered { report, csv: Some(csv) })
}

fn run_aalen(args: &AalenArgs) -> CliResult<Rendered> {
    let sample = read_right_censored(&args.input)?;
    let fit = aalen_additive(&sample)?;
    let coefficients: Vec<Vec<f64>> =
        fit.b_hat.iter().map(StepFunction::values_at_jumps).collect();
    let smoothed = match args.bandwidth {
        None => None,
        Some(b) => Some(aalen_smoothed_coefficients(
            &fit,
            b,
            args.kernel,
            &fit.rank_ok_times,
        )?),
    };
    let report = json!({
        "n": sample.n(),
        "times": fit.rank_ok_times,
        "coefficients": coefficients,
        "covariance": fit.sigma_hat,
        "smoothed_rates": smoothed,
    });
    let mut csv = String::from("time");
    for k in 0..coefficients.len() {
        let _ = write!(csv, ",b{k}");
    }
    csv.push('\n');
    for (i, &t) in fit.rank_ok_times.iter().enumerate() {
        let _ = write!(csv, "{}", csv_field(t));
        for series in &coefficients {
            let _ = write!(csv, ",{}", csv_field(series[i]));
        }
        csv.push('\n');
    }
    Ok(Rendered { report, csv: Some(csv) })
}

fn run_bj(args: &BjArgs) -> CliResult<Rendered> {
    let sample = read_right_censored(&args.input)?;
    let options = BJOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        damping: args.damping,
    };
    let fit = buckley_james(&sample, options)?;
    require_converged(fit.converged, "the Buckley-James iteration", args.max_iter)?;
    let report = json!({
        "n": sample.n(),
        "n_events": sample.n_events(),
        "beta": fit.beta,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "v_star": fit.v_star,
    });
    Ok(Rendered { report, csv: None })
}

fn run_beran(args: &BeranArgs) -> CliResult<Rendered> {
    let sample = read_right_censored(&args.input)?;
    let curve = beran_conditional(&sample, args.z0, args.bandwidth, args.kernel)?;
    let ci = pointwise_ci(&curve, args.conf_level, args.transform)?;
    let rendered = curve_rendered(
        &curve,
        args.conf_level,
        args.transform,
        &ci.lo,
        &ci.hi,
        None,
        None,
    )?;
    let mut report = rendered.report;
    let obj = report.as_object_mut().expect("curve reports are objects");
    obj.insert("z0".to_string(), json!(args.z0));
    obj.insert("bandwidth".to_string(), json!(args.bandwidth));
    obj.insert(
        "kernel".to_string(),
        serde_json::to_value(args.kernel).expect("reports hold only plain JSON data"),
    );
    Ok(Rendered { report, csv: rendered.csv })
}

fn run_parametric(args: &ParametricArgs) -> CliResult<Rendered> {
    let sample = read_right_censored(&args.input)?;
    let options = ParametricOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        fix_shape: args.fix_shape,
    };
    let fit = parametric_fit(&sample, args.family, options)?;
    require_converged(fit.converged, "the likelihood maximization", args.max_iter)?;
    let d = fit.information.len();
    let info = DMatrix::from_fn(d, d, |i, j| fit.information[i][j]);
    let se: Option<Vec<f64>> = info
        .try_inverse()
        .map(|cov| (0..d).map(|i| cov[(i, i)].sqrt()).collect());
    let report = json!({
        "family": serde_json::to_value(fit.family).expect("reports hold only plain JSON data"),
        "n": sample.n(),
        "n_events": sample.n_events(),
        "theta": fit.theta,
        "se": se,
        "information": fit.information,
        "loglik": fit.loglik,
        "iterations": fit.iterations,
        "converged": fit.converged,
    });
    Ok(Rendered { report, csv: None })
}

fn run_residuals(args: &ResidualsArgs) -> CliResult<Rendered> {
    if args.andersen_col.is_some() && args.strata_col.is_some() {
        return Err(usage("pass either --strata-col or --andersen-col, not both"));
    }
    let options = cox_options(args.tol, args.max_iter);

    if let Some(col) = &args.andersen_col {
        // read with the column as labels, then append it as the last
        // covariate so the stratifier knows which column to split on
        let opts = RightCensoredReadOptions {
            group_col: None,
            strata_col: Some(col.clone()),
        };
        let file = read_right_censored_with(&args.input, &opts)?;
        let labels = file.strata.expect("a strata column was requested");
        let mut records = file.sample.records().to_vec();
        for (r, &l) in records.iter_mut().zip(&labels) {
            r.covariates.push(l as f64);
        }
        let sample = RightCensoredSample::new(records)?;
        let plot = andersen_plot_data(&sample, sample.n_covariates() - 1, options)?;
        let report = json!({
            "levels": [plot.levels.0, plot.levels.1],
            "times": plot.times,
            "pairs": plot.pairs,
            "log_pairs": plot.log_pairs,
            "slope": plot.slope,
            "baselines": {
                "lo": {
                    "times": plot.baselines.0.jump_times(),
                    "values": plot.baselines.0.values_at_jumps(),
                },
                "hi": {
                    "times": plot.baselines.1.jump_times(),
                    "values": plot.baselines.1.values_at_jumps(),
                },
            },
        });
        let mut csv = String::from("time,baseline_lo,baseline_hi\n");
        for (t, (lo, hi)) in plot.times.iter().zip(&plot.pairs) {
            let _ = writeln!(csv, "{},{},{}", csv_field(*t), csv_field(*lo), csv_field(*hi));
        }
        return Ok(Rendered { report, csv: Some(csv) });
    }

    let opts = RightCensoredReadOptions {
        group_col: None,
        strata_col: args.strata_col.clone(),
    };
    let file = read_right_censored_with(&args.input, &opts)?;
    let sample = file.sample;
    let fit = cox_fit(&sample, options)?;
    require_converged(fit.converged, "the partial-likelihood Newton iteration", args.max_iter)?;
    let residuals = martingale_residuals(&fit, &sample)?;
    let plot = cox_snell(&fit, &sample)?;
    let arjas = match &file.strata {
        None => None,
        Some(labels) => Some(arjas_plot_data(&fit, &sample, labels)?),
    };
    let martingale_sum: f64 = residuals.martingale.iter().sum();
    let times: Vec<f64> = sample.records().iter().map(|r| r.time).collect();

    let report = json!({
        "n": sample.n(),
        "n_events": sample.n_events(),
        "beta": residuals.beta,
        "time": times,
        "status": residuals.events,
        "martingale": residuals.martingale,
        "deviance": residuals.deviance,
        "cox_snell": residuals.cox_snell,
        "martingale_sum": martingale_sum,
        "cox_snell_curve": {
            "times": plot.curve.times(),
            "values": plot.curve.estimate.values_at_jumps(),
        },
        "cox_snell_slope": plot.slope,
        "arjas": arjas.map(|strata| {
            strata
                .iter()
                .map(|s| {
                    json!({
                        "label": s.label,
                        "event_times": s.event_times,
                        "expected": s.expected,
                    })
                })
                .collect::<Vec<_>>()
        }),
    });
    let mut csv = String::from("time,status,martingale,deviance,cox_snell\n");
    for (i, &t) in times.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            csv_field(t),
            residuals.events[i],
            csv_field(residuals.martingale[i]),
            csv_field(residuals.deviance[i]),
            csv_field(residuals.cox_snell[i]),
        );
    }
    Ok(Rendered { report, csv: Some(csv) })
}

fn parse_rate_rows(s: &str) -> CliResult<Vec<Vec<f64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("bad rate entry '{}' in --markov", x.trim())))
                })
                .collect()
        })
        .collect()
}

fn run_simulate(args: &SimulateArgs) -> CliResult<Rendered> {
    let mut config = SimConfig::new(args.n, args.seed);
    config.stream = args.stream;
    config.event = args.event;
    config.censoring = args.censor;

    let bytes = if let Some(rows) = &args.markov {
        if args.model != ModelChoice::None || args.beta.is_some() || args.covariates.is_some() {
            return Err(usage("--markov draws state paths; --model/--beta/--covariates do not apply"));
        }
        let horizon = args.horizon.ok_or_else(|| usage("--markov needs --horizon"))?;
        config.markov = Some(MarkovSpec { rates: parse_rate_rows(rows)?, horizon });
        let history = simulate_markov(&config)?;
        let mut bytes = Vec::new();
        write_multistate(&history, &mut bytes)?;
        bytes
    } else {
        if args.horizon.is_some() {
            return Err(usage("--horizon applies only with --markov"));
        }
        config.model = match (args.model, &args.beta) {
            (ModelChoice::None, None) => ModelSpec::None,
            (ModelChoice::None, Some(_)) => {
                return Err(usage("--beta needs --model cox or --model aft"));
            }
            (ModelChoice::Cox, Some(beta)) => ModelSpec::Cox { beta: beta.clone() },
            (ModelChoice::Aft, Some(beta)) => ModelSpec::Aft {
                beta: beta.clone(),
                sigma: args.sigma.unwrap_or(1.0),
            },
            (_, None) => return Err(usage("--model cox/aft needs --beta")),
        };
        if args.sigma.is_some() && args.model != ModelChoice::Aft {
            return Err(usage("--sigma applies only with --model aft"));
        }
        config.covariates = match (&config.model, args.covariates) {
            (_, Some(law)) => law,
            (ModelSpec::None, None) => CovariateLaw::None,
            (ModelSpec::Cox { beta } | ModelSpec::Aft { beta, .. }, None) => {
                CovariateLaw::StandardNormal { dim: beta.len() }
            }
        };
        let sample = simulate_right_censored(&config)?;
        let mut bytes = Vec::new();
        write_right_censored(&sample, &mut bytes)?;
        bytes
    };
    Ok(Rendered {
        report: Value::Null,
        csv: Some(String::from_utf8(bytes).expect("sample CSVs are ASCII")),
    })
}
