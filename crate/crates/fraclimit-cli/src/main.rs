//! Command line front end. Every subcommand resolves its configuration
//! (flags over an optional key=value file over documented defaults), runs
//! one library operation, and emits JSON or CSV with the resolved
//! configuration embedded, so any output can be traced back to the exact
//! run that produced it.
//!
//! Exit codes: 0 success, 2 configuration or precondition error, 1 runtime
//! failure. The root seed defaults to 42 so repeated runs are byte
//! identical; set FRACLIMIT_THREADS to cap the worker pool.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fraclimit::constants::{ConstError, NormalizationBundle};
use fraclimit::diagrams::{self, CorrelationMatrix, DiagramError};
use fraclimit::fracproc::{
    foup_from_fbm, FbmSampler, FoupSpec, FracError, GaussPath, HurstIndex, StationaryFoupSampler,
    TimeGrid,
};
use fraclimit::hermite::{expand, Functional, HermiteError};
use fraclimit::mclab::{self, ExperimentReport, McError};
use fraclimit::seeds;
use fraclimit::stats::{self, EmpiricalSummary, StatsError};
use fraclimit::unitroot::{self, Ar1Config, Innovation, UnitRootError};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_REPS: usize = 2000;
const DEFAULT_DT: f64 = 0.05;
/// Fine grid for the unit-interval statistics, which must resolve the
/// boundary layer near the endpoint for moderate rates.
const DEFAULT_UNIT_DT: f64 = 2.5e-4;
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(
    name = "fraclimit",
    version,
    about = "Limit theorems of integrated functionals of fractional Ornstein-Uhlenbeck processes: constants, simulation and Monte Carlo verification"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Norming constants and regime classification for a rank and Hurst index
    Constants(ConstantsArgs),
    /// Pairing counts and Gaussian product moments of Hermite polynomials
    Diagram(DiagramArgs),
    /// Dump one sampled path
    Sample(SampleArgs),
    /// Monte Carlo verification experiments
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Near-unit-root statistics and limit-law samples
    #[command(subcommand)]
    Unitroot(UnitrootCmd),
}

#[derive(Subcommand, Debug)]
enum VerifyCmd {
    /// Weak-regime central limit experiment for a Hermite functional
    Clt(ExperimentArgs),
    /// Boundary-regime experiment at H = 1 - 1/(2q)
    Boundary(ExperimentArgs),
    /// Strong-regime noncentral experiment (rank 2, H > 3/4)
    Nclt(ExperimentArgs),
    /// Variance against the 2 q! t L(t) norming over a horizon ladder
    VarianceScaling(ScalingArgs),
    /// Exponential smoothing: deterministic sup-error study and optional
    /// stochastic variance check
    Smoothing(SmoothingArgs),
}

#[derive(Subcommand, Debug)]
enum UnitrootCmd {
    /// Replicate sample of the studentized slope limit functional
    Taubar(TaubarArgs),
    /// Mean-reverting limit sample (gamma > 1), four normalized components
    Ergodic(TauArgs),
    /// Explosive limit sample (gamma < 0), four normalized components
    Explosive(TauArgs),
    /// Discrete AR(1) sample of the studentized slope statistic
    Discrete(DiscreteArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutFormat {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PathKindArg {
    /// Fractional Brownian motion
    Fbm,
    /// Zero-start Ornstein-Uhlenbeck transform of the driver
    Foup,
    /// Stationary unit-variance Ornstein-Uhlenbeck process
    Stationary,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat key=value configuration file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output format (default json; sample defaults to csv)
    #[arg(long, value_enum)]
    out: Option<OutFormat>,
    /// Write to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Root seed (default 42, fixed for reproducibility)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Hurst index in (0, 1)
    #[arg(long)]
    h: Option<f64>,
    /// Hermite rank
    #[arg(long)]
    q: Option<usize>,
    /// Mean-reversion rate (optional; enables the rate-dependent entries)
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
}

#[derive(Args, Debug)]
struct DiagramArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of Hermite factors in the product
    #[arg(long)]
    p: Option<usize>,
    /// Order of each Hermite factor
    #[arg(long)]
    q: Option<usize>,
    /// Equicorrelation; when given, the product moment is evaluated too
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which process to sample
    #[arg(long, value_enum)]
    kind: Option<PathKindArg>,
    #[arg(long)]
    h: Option<f64>,
    /// Mean-reversion rate (required for foup and stationary)
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Horizon
    #[arg(long)]
    t: Option<f64>,
    /// Grid step
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Hermite rank of the test functional
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    q: Option<usize>,
    /// Comma-separated increasing horizons
    #[arg(long = "t-ladder", value_delimiter = ',')]
    t_ladder: Option<Vec<f64>>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args, Debug)]
struct SmoothingArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Smoothing rate
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Horizons for the deterministic sup-error study
    #[arg(long = "t-ladder", value_delimiter = ',')]
    t_ladder: Option<Vec<f64>>,
    /// Hölder exponent of the test function s (beta = 1)
    #[arg(long)]
    beta: Option<f64>,
    /// Hölder constant of the test function
    #[arg(long)]
    ct: Option<f64>,
    /// Grid points for the sup over the unit interval
    #[arg(long = "v-points")]
    v_points: Option<usize>,
    /// Hurst index for the stochastic check (omit to skip it)
    #[arg(long)]
    h: Option<f64>,
    /// Horizon for the stochastic check
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args, Debug)]
struct TaubarArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args, Debug)]
struct TauArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args, Debug)]
struct DiscreteArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Series length
    #[arg(long)]
    n: Option<usize>,
    /// Deviation rate; the AR coefficient is 1 - gamma/n
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Hurst index for fractional noise innovations (omit for iid normal)
    #[arg(long)]
    h: Option<f64>,
    /// Innovation variance
    #[arg(long = "sigma-sq")]
    sigma_sq: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl From<ConstError> for CliError {
    fn from(e: ConstError) -> Self {
        match e {
            ConstError::Quad(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FracError> for CliError {
    fn from(e: FracError) -> Self {
        match e {
            FracError::EmbeddingFailed { .. } | FracError::QuadratureFailed(_) => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<HermiteError> for CliError {
    fn from(e: HermiteError) -> Self {
        match e {
            HermiteError::Quad(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DiagramError> for CliError {
    fn from(e: DiagramError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Frac(inner) => inner.into(),
            McError::Hermite(inner) => inner.into(),
            McError::Stats(inner) => inner.into(),
            McError::Const(inner) => inner.into(),
            McError::Quad(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<UnitRootError> for CliError {
    fn from(e: UnitRootError) -> Self {
        match e {
            UnitRootError::Frac(inner) => inner.into(),
            UnitRootError::Stats(inner) => inner.into(),
            UnitRootError::Const(inner) => inner.into(),
            UnitRootError::DegenerateSeries | UnitRootError::DegeneratePath => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// Key=value lookup backing the flag resolution. Lines are `key=value`;
/// blank lines and `#` comments are ignored.
struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    invalid(format!(
                        "config line {} is not key=value: {line:?}",
                        lineno + 1
                    ))
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(FileConfig { map })
    }

    /// Flag value if present, else the parsed config-file value.
    fn or<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| invalid(format!("config key {key} has unparsable value {raw:?}"))),
        }
    }

    fn ladder(&self, flag: Option<Vec<f64>>, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| invalid(format!("config key {key} has unparsable value {raw:?}"))),
        }
    }
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| invalid(format!("missing required flag --{flag}")))
}

fn hurst(h: f64) -> Result<HurstIndex, CliError> {
    Ok(HurstIndex::new(h)?)
}

/// Everything a run prints: a schema tag, the artifact version, the fully
/// resolved configuration, and the result.
#[derive(Serialize)]
struct Document<C: Serialize, R: Serialize> {
    schema: String,
    version: &'static str,
    config: C,
    result: R,
}

enum Payload {
    Json(String),
    Csv(String),
}

fn emit(payload: Payload, output: Option<&Path>) -> Result<(), CliError> {
    let text = match payload {
        Payload::Json(s) | Payload::Csv(s) => s,
    };
    match output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
    }
}

fn json_doc<C: Serialize, R: Serialize>(
    schema: &str,
    config: C,
    result: R,
) -> Result<Payload, CliError> {
    let doc = Document {
        schema: format!("fraclimit/{schema}/v1"),
        version: VERSION,
        config,
        result,
    };
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Runtime(format!("serialization failed: {e}")))?;
    Ok(Payload::Json(body + "\n"))
}

/// CSV with the provenance fields as leading comment lines.
fn csv_doc<C: Serialize>(
    schema: &str,
    config: &C,
    header: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<Payload, CliError> {
    let mut text = String::new();
    let _ = writeln!(text, "# schema=fraclimit/{schema}/v1");
    let _ = writeln!(text, "# version={VERSION}");
    let cfg = serde_json::to_value(config)
        .map_err(|e| CliError::Runtime(format!("serialization failed: {e}")))?;
    if let serde_json::Value::Object(map) = cfg {
        for (k, v) in map {
            let _ = writeln!(text, "# {k}={v}");
        }
    }
    let _ = writeln!(text, "{}", header.join(","));
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(text, "{}", line.join(","));
    }
    Ok(Payload::Csv(text))
}

fn out_format(
    common: &CommonArgs,
    file: &FileConfig,
    default: OutFormat,
) -> Result<OutFormat, CliError> {
    if let Some(f) = common.out {
        return Ok(f);
    }
    match file.map.get("out").map(|s| s.as_str()) {
        None => Ok(default),
        Some("json") => Ok(OutFormat::Json),
        Some("csv") => Ok(OutFormat::Csv),
        Some(other) => Err(invalid(format!("unknown output format {other:?}"))),
    }
}

fn json_only(fmt: OutFormat, what: &str) -> Result<(), CliError> {
    if fmt == OutFormat::Csv {
        Err(invalid(format!(
            "{what} has no tabular form; use --out json"
        )))
    } else {
        Ok(())
    }
}

fn run_constants(args: ConstantsArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let h = require(file.or(args.h, "h")?, "h")?;
    let q = file.or(args.q, "q")?.unwrap_or(2);
    let gamma = file.or(args.gamma, "gamma")?;
    let fmt = out_format(&args.common, &file, OutFormat::Json)?;
    json_only(fmt, "constants")?;

    #[derive(Serialize)]
    struct Config {
        h: f64,
        q: usize,
        gamma: Option<f64>,
        seed: u64,
    }
    let bundle = NormalizationBundle::new(q, h, gamma)?;
    let doc = json_doc(
        "constants",
        Config {
            h,
            q,
            gamma,
            seed: DEFAULT_SEED,
        },
        bundle,
    )?;
    emit(doc, args.common.output.as_deref())
}

fn run_diagram(args: DiagramArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let p = require(file.or(args.p, "p")?, "p")?;
    let q = require(file.or(args.q, "q")?, "q")?;
    let rho = file.or(args.rho, "rho")?;
    let fmt = out_format(&args.common, &file, OutFormat::Json)?;
    json_only(fmt, "diagram")?;

    #[derive(Serialize)]
    struct Config {
        p: usize,
        q: usize,
        rho: Option<f64>,
    }
    #[derive(Serialize)]
    struct Output {
        count: usize,
        moment: Option<f64>,
    }
    let count = diagrams::enumerate_diagrams(p, q)?.len();
    let moment = match rho {
        None => None,
        Some(r) => {
            let corr = CorrelationMatrix::equicorrelated(p, r)?;
            Some(diagrams::diagram_moment(p, q, &corr)?)
        }
    };
    let doc = json_doc("diagram", Config { p, q, rho }, Output { count, moment })?;
    emit(doc, args.common.output.as_deref())
}

fn run_sample(args: SampleArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let kind = match (args.kind, file.map.get("kind").map(|s| s.as_str())) {
        (Some(k), _) => k,
        (None, Some("fbm")) => PathKindArg::Fbm,
        (None, Some("foup")) => PathKindArg::Foup,
        (None, Some("stationary")) => PathKindArg::Stationary,
        (None, Some(other)) => return Err(invalid(format!("unknown path kind {other:?}"))),
        (None, None) => return Err(invalid("missing required flag --kind".to_string())),
    };
    let h = require(file.or(args.h, "h")?, "h")?;
    let gamma = file.or(args.gamma, "gamma")?;
    let t = file.or(args.t, "t")?.unwrap_or(1.0);
    let dt = file.or(args.dt, "dt")?.unwrap_or(DEFAULT_DT);
    let seed = file.or(args.common.seed, "seed")?.unwrap_or(DEFAULT_SEED);
    let fmt = out_format(&args.common, &file, OutFormat::Csv)?;

    if !(dt > 0.0 && t > 0.0) {
        return Err(invalid(format!(
            "need positive t and dt, got t={t} dt={dt}"
        )));
    }
    let hv = hurst(h)?;
    let steps = (t / dt).round().max(1.0) as usize;
    let grid = TimeGrid::new(steps as f64 * dt, steps)?;
    let mut rng = seeds::rng_for(seed, 0);

    let path: GaussPath = match kind {
        PathKindArg::Fbm => FbmSampler::new(hv, grid)?.sample(&mut rng),
        PathKindArg::Foup => {
            let g = require(gamma, "gamma")?;
            let fbm = FbmSampler::new(hv, grid)?.sample(&mut rng);
            foup_from_fbm(g, &fbm)?
        }
        PathKindArg::Stationary => {
            let g = require(gamma, "gamma")?;
            let spec = FoupSpec::with_default_burn_in(hv, g)?;
            StationaryFoupSampler::new(spec, grid)?.sample(&mut rng)?
        }
    };

    #[derive(Serialize)]
    struct Config {
        kind: PathKindArg,
        h: f64,
        gamma: Option<f64>,
        t: f64,
        dt: f64,
        seed: u64,
    }
    let config = Config {
        kind,
        h,
        gamma,
        t: grid.horizon(),
        dt,
        seed,
    };
    let doc = match fmt {
        OutFormat::Csv => csv_doc(
            "sample",
            &config,
            &["t", "value"],
            path.values
                .iter()
                .enumerate()
                .map(|(k, v)| vec![grid.time(k), *v]),
        )?,
        OutFormat::Json => json_doc("sample", config, &path.values)?,
    };
    emit(doc, args.common.output.as_deref())
}

struct ResolvedExperiment {
    h: Option<f64>,
    gamma: f64,
    q: usize,
    t: f64,
    dt: f64,
    reps: usize,
    seed: u64,
    fmt: OutFormat,
}

fn resolve_experiment(
    args: &ExperimentArgs,
    default_t: f64,
) -> Result<ResolvedExperiment, CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    Ok(ResolvedExperiment {
        h: file.or(args.h, "h")?,
        gamma: file.or(args.gamma, "gamma")?.unwrap_or(1.0),
        q: file.or(args.q, "q")?.unwrap_or(2),
        t: file.or(args.t, "t")?.unwrap_or(default_t),
        dt: file.or(args.dt, "dt")?.unwrap_or(DEFAULT_DT),
        reps: file.or(args.reps, "reps")?.unwrap_or(DEFAULT_REPS),
        seed: file.or(args.common.seed, "seed")?.unwrap_or(DEFAULT_SEED),
        fmt: out_format(&args.common, &file, OutFormat::Json)?,
    })
}

#[derive(Serialize)]
struct ExperimentCliConfig {
    h: f64,
    gamma: f64,
    q: usize,
    t: f64,
    dt: f64,
    reps: usize,
    seed: u64,
}

fn emit_experiment(
    schema: &str,
    cfg: ExperimentCliConfig,
    report: ExperimentReport,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let doc = json_doc(schema, cfg, report)?;
    emit(doc, output)
}

fn run_verify(cmd: VerifyCmd) -> Result<(), CliError> {
    match cmd {
        VerifyCmd::Clt(args) => {
            let r = resolve_experiment(&args, 200.0)?;
            json_only(r.fmt, "verify clt")?;
            let h = require(r.h, "h")?;
            let f = expand(&Functional::hermite(r.q), r.q.max(8), 128)?;
            let report = mclab::clt_experiment(&f, hurst(h)?, r.gamma, r.t, r.dt, r.reps, r.seed)?;
            emit_experiment(
                "verify-clt",
                ExperimentCliConfig {
                    h,
                    gamma: r.gamma,
                    q: r.q,
                    t: r.t,
                    dt: r.dt,
                    reps: r.reps,
                    seed: r.seed,
                },
                report,
                args.common.output.as_deref(),
            )
        }
        VerifyCmd::Boundary(args) => {
            let r = resolve_experiment(&args, 400.0)?;
            json_only(r.fmt, "verify boundary")?;
            let report = mclab::boundary_experiment(r.q, r.gamma, r.t, r.dt, r.reps, r.seed)?;
            let h = report.config.h;
            emit_experiment(
                "verify-boundary",
                ExperimentCliConfig {
                    h,
                    gamma: r.gamma,
                    q: r.q,
                    t: r.t,
                    dt: r.dt,
                    reps: r.reps,
                    seed: r.seed,
                },
                report,
                args.common.output.as_deref(),
            )
        }
        VerifyCmd::Nclt(args) => {
            let r = resolve_experiment(&args, 200.0)?;
            json_only(r.fmt, "verify nclt")?;
            let h = require(r.h, "h")?;
            let report =
                mclab::nclt_experiment(r.q, hurst(h)?, r.gamma, r.t, r.dt, r.reps, r.seed)?;
            emit_experiment(
                "verify-nclt",
                ExperimentCliConfig {
                    h,
                    gamma: r.gamma,
                    q: r.q,
                    t: r.t,
                    dt: r.dt,
                    reps: r.reps,
                    seed: r.seed,
                },
                report,
                args.common.output.as_deref(),
            )
        }
        VerifyCmd::VarianceScaling(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let h = require(file.or(args.h, "h")?, "h")?;
            let gamma = file.or(args.gamma, "gamma")?.unwrap_or(1.0);
            let q = file.or(args.q, "q")?.unwrap_or(2);
            let ladder = file
                .ladder(args.t_ladder.clone(), "t_ladder")?
                .unwrap_or_else(|| vec![100.0, 400.0, 1600.0]);
            let dt = file.or(args.dt, "dt")?.unwrap_or(DEFAULT_DT);
            let reps = file.or(args.reps, "reps")?.unwrap_or(DEFAULT_REPS);
            let seed = file.or(args.common.seed, "seed")?.unwrap_or(DEFAULT_SEED);
            let fmt = out_format(&args.common, &file, OutFormat::Json)?;
            json_only(fmt, "verify variance-scaling")?;

            let study = mclab::variance_scaling(q, hurst(h)?, gamma, &ladder, reps, dt, seed)?;
            #[derive(Serialize)]
            struct Config {
                h: f64,
                gamma: f64,
                q: usize,
                t_ladder: Vec<f64>,
                dt: f64,
                reps: usize,
                seed: u64,
            }
            let doc = json_doc(
                "verify-variance-scaling",
                Config {
                    h,
                    gamma,
                    q,
                    t_ladder: ladder,
                    dt,
                    reps,
                    seed,
                },
                study,
            )?;
            emit(doc, args.common.output.as_deref())
        }
        VerifyCmd::Smoothing(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let gamma = file.or(args.gamma, "gamma")?.unwrap_or(2.0);
            let ladder = file
                .ladder(args.t_ladder.clone(), "t_ladder")?
                .unwrap_or_else(|| vec![10.0, 100.0]);
            let beta = file.or(args.beta, "beta")?.unwrap_or(1.0);
            let ct = file.or(args.ct, "ct")?.unwrap_or(1.0);
            let v_points = file.or(args.v_points, "v_points")?.unwrap_or(20);
            let h = file.or(args.h, "h")?;
            let t = file.or(args.t, "t")?.unwrap_or(400.0);
            let dt = file.or(args.dt, "dt")?.unwrap_or(DEFAULT_DT);
            let reps = file.or(args.reps, "reps")?.unwrap_or(DEFAULT_REPS);
            let seed = file.or(args.common.seed, "seed")?.unwrap_or(DEFAULT_SEED);
            let fmt = out_format(&args.common, &file, OutFormat::Json)?;
            json_only(fmt, "verify smoothing")?;

            // The deterministic study fixes the test function s -> s, which
            // has Hölder constant 1 at every exponent <= 1.
            let det =
                mclab::smoothing_deterministic_study(|s| s, gamma, ct, beta, &ladder, v_points)?;
            let stochastic = match h {
                None => None,
                Some(h) => Some(mclab::smoothing_stochastic(
                    hurst(h)?,
                    gamma,
                    t,
                    dt,
                    reps,
                    seed,
                )?),
            };
            #[derive(Serialize)]
            struct Config {
                gamma: f64,
                t_ladder: Vec<f64>,
                beta: f64,
                ct: f64,
                v_points: usize,
                h: Option<f64>,
                t: f64,
                dt: f64,
                reps: usize,
                seed: u64,
            }
            #[derive(Serialize)]
            struct Output {
                deterministic: mclab::SmoothingReport,
                stochastic: Option<ExperimentReport>,
            }
            let doc = json_doc(
                "verify-smoothing",
                Config {
                    gamma,
                    t_ladder: ladder,
                    beta,
                    ct,
                    v_points,
                    h,
                    t,
                    dt,
                    reps,
                    seed,
                },
                Output {
                    deterministic: det,
                    stochastic,
                },
            )?;
            emit(doc, args.common.output.as_deref())
        }
    }
}

#[derive(Serialize)]
struct TauCliConfig {
    h: f64,
    gamma: f64,
    dt: f64,
    reps: usize,
    seed: u64,
}

#[derive(Serialize)]
struct TauOutput {
    summaries: [EmpiricalSummary; 4],
    /// Correlation of the first and third components.
    corr_13: f64,
    ks_critical_1pct: f64,
}

fn tau_output(columns: &[Vec<f64>; 4], reps: usize) -> Result<TauOutput, CliError> {
    let summaries = [
        stats::empirical_summary(&columns[0])?,
        stats::empirical_summary(&columns[1])?,
        stats::empirical_summary(&columns[2])?,
        stats::empirical_summary(&columns[3])?,
    ];
    Ok(TauOutput {
        summaries,
        corr_13: stats::pearson(&columns[0], &columns[2])?,
        ks_critical_1pct: stats::ks_critical_1pct(reps),
    })
}

fn emit_tau_sample(
    schema: &str,
    cfg: TauCliConfig,
    sample: unitroot::TauSample,
    fmt: OutFormat,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let doc = match fmt {
        OutFormat::Json => json_doc(schema, cfg, tau_output(&sample.columns, sample.reps)?)?,
        OutFormat::Csv => {
            let rows = (0..sample.reps)
                .map(|i| (0..4).map(|j| sample.columns[j][i]).collect::<Vec<f64>>());
            csv_doc(schema, &cfg, &["c1", "c2", "c3", "c4"], rows)?
        }
    };
    emit(doc, output)
}

fn run_unitroot(cmd: UnitrootCmd) -> Result<(), CliError> {
    match cmd {
        UnitrootCmd::Taubar(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let gamma = require(file.or(args.gamma, "gamma")?, "gamma")?;
            let dt = file.or(args.dt, "dt")?.unwrap_or(DEFAULT_UNIT_DT);
            let reps = file.or(args.reps, "reps")?.unwrap_or(DEFAULT_REPS);
            let seed = file.or(args.common.seed, "seed")?.unwrap_or(DEFAULT_SEED);
            let fmt = out_format(&args.common, &file, OutFormat::Json)?;

            let sample = unitroot::tau_bar_sample(gamma, reps, dt, seed)?;
            #[derive(Serialize)]
            struct Config {
                gamma: f64,
                dt: f64,
                reps: usize,
                seed: u64,
            }
            let cfg = Config {
                gamma,
                dt,
                reps,
                seed,
            };
            let doc = match fmt {
                OutFormat::Json => {
                    #[derive(Serialize)]
                    struct Output {
                        summary: EmpiricalSummary,
                        ks_critical_1pct: f64,
                    }
                    json_doc(
                        "unitroot-taubar",
                        cfg,
                        Output {
                            summary: stats::empirical_summary(&sample)?,
                            ks_critical_1pct: stats::ks_critical_1pct(reps),
                        },
                    )?
                }
                OutFormat::Csv => csv_doc(
                    "unitroot-taubar",
                    &cfg,
                    &["taubar"],
                    sample.iter().map(|v| vec![*v]),
                )?,
            };
            emit(doc, args.common.output.as_deref())
        }
        UnitrootCmd::Ergodic(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let h = require(file.or(args.h, "h")?, "h")?;
            let gamma = require(file.or(args.gamma, "gamma")?, "gamma")?;
            let dt = file.or(args.dt, "dt")?.unwrap_or(DEFAULT_UNIT_DT);
            let reps = file.or(args.reps, "reps")?.unwrap_or(DEFAULT_REPS);
            let seed = file.or(args.common.seed, "seed")?.unwrap_or(DEFAULT_SEED);
            let fmt = out_format(&args.common, &file, OutFormat::Json)?;
            let sample = unitroot::ergodic_tau_sample(hurst(h)?, gamma, reps, dt, seed)?;
            emit_tau_sample(
                "unitroot-ergodic",
                TauCliConfig {
                    h,
                    gamma,
                    dt,
                    reps,
                    seed,
                },
                sample,
                fmt,
                args.common.output.as_deref(),
            )
        }
        UnitrootCmd::Explosive(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let h = require(file.or(args.h, "h")?, "h")?;
            let gamma = require(file.or(args.gamma, "gamma")?, "gamma")?;
            let dt = file.or(args.dt, "dt")?.unwrap_or(DEFAULT_UNIT_DT);
            let reps = file.or(args.reps, "reps")?.unwrap_or(DEFAULT_REPS);
            let seed = file.or(args.common.seed, "seed")?.unwrap_or(DEFAULT_SEED);
            let fmt = out_format(&args.common, &file, OutFormat::Json)?;
            let sample = unitroot::explosive_tau_sample(hurst(h)?, gamma, reps, dt, seed)?;
            emit_tau_sample(
                "unitroot-explosive",
                TauCliConfig {
                    h,
                    gamma,
                    dt,
                    reps,
                    seed,
                },
                sample,
                fmt,
                args.common.output.as_deref(),
            )
        }
        UnitrootCmd::Discrete(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let n = file.or(args.n, "n")?.unwrap_or(1000);
            let gamma = file.or(args.gamma, "gamma")?.unwrap_or(0.0);
            let h = file.or(args.h, "h")?;
            let sigma_sq = file.or(args.sigma_sq, "sigma_sq")?.unwrap_or(1.0);
            let reps = file.or(args.reps, "reps")?.unwrap_or(DEFAULT_REPS);
            let seed = file.or(args.common.seed, "seed")?.unwrap_or(DEFAULT_SEED);
            let fmt = out_format(&args.common, &file, OutFormat::Json)?;

            let innovation = match h {
                None => Innovation::IidNormal,
                Some(h) => Innovation::Fgn { h: hurst(h)? },
            };
            let cfg = Ar1Config {
                n,
                gamma,
                innovation,
                sigma_sq,
                seed,
            };
            let sample = unitroot::discrete_tau_sample(&cfg, reps)?;
            #[derive(Serialize)]
            struct Config {
                n: usize,
                gamma: f64,
                h: Option<f64>,
                sigma_sq: f64,
                reps: usize,
                seed: u64,
            }
            let ccfg = Config {
                n,
                gamma,
                h,
                sigma_sq,
                reps,
                seed,
            };
            let doc = match fmt {
                OutFormat::Json => {
                    #[derive(Serialize)]
                    struct Output {
                        coefficient: f64,
                        summary: EmpiricalSummary,
                        ks_critical_1pct: f64,
                    }
                    json_doc(
                        "unitroot-discrete",
                        ccfg,
                        Output {
                            coefficient: cfg.coefficient(),
                            summary: stats::empirical_summary(&sample)?,
                            ks_critical_1pct: stats::ks_critical_1pct(reps),
                        },
                    )?
                }
                OutFormat::Csv => csv_doc(
                    "unitroot-discrete",
                    &ccfg,
                    &["tau_hat"],
                    sample.iter().map(|v| vec![*v]),
                )?,
            };
            emit(doc, args.common.output.as_deref())
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    match std::env::var("FRACLIMIT_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw.parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
                invalid(format!(
                    "FRACLIMIT_THREADS={raw:?} is not a positive integer"
                ))
            })?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Runtime(format!("cannot size thread pool: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Constants(args) => run_constants(args),
        Cmd::Diagram(args) => run_diagram(args),
        Cmd::Sample(args) => run_sample(args),
        Cmd::Verify(cmd) => run_verify(cmd),
        Cmd::Unitroot(cmd) => run_unitroot(cmd),
    }
}

fn report_error(msg: &str) {
    let diag = serde_json::json!({ "error": msg });
    eprintln!("{diag}");
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    if let Err(e) = init_threads() {
        report_error(e.message());
        return e.code();
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            report_error(&e.to_string());
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.message());
            e.code()
        }
    }
}
