//! `rdvswarm` command-line front end.
//!
//! Exit codes: 0 success, 2 argument error, 3 data or IO error,
//! 4 degenerate statistics.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rdvswarm::experiments::CellAggregate;
use rdvswarm::forecast::{prepare, train};
use rdvswarm::inertia::{DampingMode, IwStrategy, RdvParams};
use rdvswarm::metrics::MetricsRecord;
use rdvswarm::nar::{Activation, Activations, Architecture, ModelFile};
use rdvswarm::series::{load_series, synthetic_series, SplitRatios, SyntheticSpec};
use rdvswarm::{
    benchmark_objective, compare_variants, grid_sweep, parse_grid, run_pso, stabilization_iteration, BenchmarkFunction,
    CompareSpec, ForecastConfig, PeMode, PsoConfig, SplitMode, Stabilization, SweepSpec, Tail, Task, Variant,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    Arg(String),
    Data(String),
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Arg(_) => 2,
            CliError::Data(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Arg(m) => write!(f, "argument error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate statistics: {m}"),
        }
    }
}

impl From<rdvswarm::Error> for CliError {
    fn from(e: rdvswarm::Error) -> Self {
        use rdvswarm::Error as E;
        match e {
            E::InvalidArgument { name, message } => CliError::Arg(format!("--{name}: {message}")),
            E::DimensionMismatch { .. } => CliError::Arg(e.to_string()),
            E::Degenerate(_) => CliError::Degenerate(e.to_string()),
            E::Io { .. }
            | E::Row { .. }
            | E::InsufficientHistory { .. }
            | E::NonFiniteObjective { .. }
            | E::Serialization(_) => CliError::Data(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "rdvswarm",
    version,
    about = "Random descending velocity PSO: training, forecasting and experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a lag network to a monthly CSV series with PSO; writes model, report and trace.
    Train(TrainArgs),
    /// Forecast future months from a saved model.
    Forecast(ForecastArgs),
    /// Grid sweep over (alpha, alpha_dump); writes sweep.csv.
    Sweep(SweepArgs),
    /// Paired multi-trial comparison of two inertia strategies; writes compare.json.
    Compare(CompareArgs),
    /// Run PSO on a benchmark function; writes report and trace.
    Bench(BenchArgs),
    /// Write a synthetic monthly series (trend + seasonality + noise).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IwKind {
    Constant,
    Linear,
    Random,
    Rdv,
}

#[derive(Debug, Clone, Args)]
pub struct IwArgs {
    /// Inertia-weight strategy.
    #[arg(long, value_enum, default_value_t = IwKind::Rdv)]
    pub iw: IwKind,
    /// RDV initial speed alpha.
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    /// RDV damping factor.
    #[arg(long = "alpha-dump", default_value_t = 0.9)]
    pub alpha_dump: f64,
    /// RDV gate decay sharpness k in exp(-k t / T).
    #[arg(long = "decay-sharpness", default_value_t = 1.0)]
    pub decay_sharpness: f64,
    /// Consult the RDV gate once per iteration instead of once per particle.
    #[arg(long = "per-iteration-damping")]
    pub per_iteration_damping: bool,
    /// Weight for --iw constant.
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,
    /// Starting weight for --iw linear.
    #[arg(long = "w-max", default_value_t = 0.9)]
    pub w_max: f64,
    /// Final weight for --iw linear.
    #[arg(long = "w-min", default_value_t = 0.4)]
    pub w_min: f64,
}

impl IwArgs {
    pub fn strategy(&self) -> IwStrategy {
        self.strategy_of(self.iw)
    }

    fn strategy_of(&self, kind: IwKind) -> IwStrategy {
        match kind {
            IwKind::Constant => IwStrategy::Constant { w: self.w },
            IwKind::Linear => IwStrategy::LinearDecreasing {
                w_max: self.w_max,
                w_min: self.w_min,
            },
            IwKind::Random => IwStrategy::RandomUniform,
            IwKind::Rdv => IwStrategy::Rdv(self.rdv()),
        }
    }

    fn rdv(&self) -> RdvParams {
        RdvParams {
            alpha: self.alpha,
            alpha_dump: self.alpha_dump,
            decay_sharpness: self.decay_sharpness,
            mode: if self.per_iteration_damping {
                DampingMode::PerIteration
            } else {
                DampingMode::PerParticle
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PsoArgs {
    /// Cognitive coefficient.
    #[arg(long, default_value_t = 2.0)]
    pub c1: f64,
    /// Social coefficient.
    #[arg(long, default_value_t = 2.0)]
    pub c2: f64,
    /// Swarm size.
    #[arg(long, default_value_t = 30)]
    pub swarm: usize,
    /// Iterations per run.
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Symmetric position bound.
    #[arg(long, default_value_t = 10.0)]
    pub limit: f64,
    /// Base random seed.
    #[arg(long, env = "RDV_SWARM_SEED", default_value_t = 42)]
    pub seed: u64,
}

impl PsoArgs {
    pub fn config(&self) -> PsoConfig {
        PsoConfig {
            swarm_size: self.swarm,
            max_iterations: self.iters,
            c1: self.c1,
            c2: self.c2,
            position_limit: self.limit,
            seed: self.seed,
            ..PsoConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Lag count m.
    #[arg(long, default_value_t = 12)]
    pub lags: usize,
    /// Hidden layer widths, comma separated; `none` for a direct linear model.
    #[arg(long, default_value = "10")]
    pub hidden: String,
    /// Hidden activation.
    #[arg(long, default_value = "tanh")]
    pub activation: Activation,
    /// Output activation.
    #[arg(long = "output-activation", default_value = "identity")]
    pub output_activation: Activation,
    /// Train,validation,test fractions.
    #[arg(long, default_value = "0.7,0.15,0.15")]
    pub split: String,
    /// Shuffle lag rows with this seed before splitting instead of splitting chronologically.
    #[arg(long = "random-split")]
    pub random_split: Option<u64>,
    /// Use the unsquared position error sqrt(sum(b - a)) as fitness.
    #[arg(long = "literal-eq18")]
    pub literal_eq18: bool,
}

fn parse_hidden(s: &str) -> CliResult<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Arg(format!("--hidden: `{p}` is not a layer width")))
        })
        .collect()
}

fn parse_split(s: &str) -> CliResult<SplitRatios> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Arg(format!("--split: `{s}` is not three numbers")))?;
    if parts.len() != 3 {
        return Err(CliError::Arg(format!("--split: expected three ratios, got `{s}`")));
    }
    let r = SplitRatios {
        train: parts[0],
        val: parts[1],
        test: parts[2],
    };
    r.validate()?;
    Ok(r)
}

impl ModelArgs {
    pub fn config(&self) -> CliResult<ForecastConfig> {
        let architecture = Architecture::new(
            self.lags,
            parse_hidden(&self.hidden)?,
            Activations {
                hidden: self.activation,
                output: self.output_activation,
            },
        )?;
        Ok(ForecastConfig {
            architecture,
            split: parse_split(&self.split)?,
            split_mode: match self.random_split {
                Some(seed) => SplitMode::Random { seed },
                None => SplitMode::Chronological,
            },
            pe_mode: if self.literal_eq18 {
                PeMode::Literal
            } else {
                PeMode::Euclidean
            },
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct StabArgs {
    /// Velocity stabilization window.
    #[arg(long, default_value_t = 3)]
    pub window: usize,
    /// Velocity stabilization relative tolerance.
    #[arg(long = "rel-tol", default_value_t = 0.05)]
    pub rel_tol: f64,
}

impl StabArgs {
    fn config(&self) -> Stabilization {
        Stabilization {
            window: self.window,
            rel_tol: self.rel_tol,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Monthly series CSV (`month,value`).
    #[arg(long, required_unless_present = "replay")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub iw: IwArgs,
    #[command(flatten)]
    pub pso: PsoArgs,
    #[command(flatten)]
    pub stab: StabArgs,
    /// Also report the unrooted NRMSE variant as `nmse`.
    #[arg(long)]
    pub nmse: bool,
    /// Output directory.
    #[arg(long, default_value = "rdv-out")]
    pub out: PathBuf,
    /// Re-run the resolved configuration stored in a previous report.json.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// History CSV; the forecast continues after its last month.
    #[arg(long)]
    pub data: PathBuf,
    /// Months to forecast.
    #[arg(long, default_value_t = 12)]
    pub horizon: usize,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Aggregate {
    Mean,
    Min,
}

#[derive(Debug, Args)]
pub struct ObjectiveArgs {
    /// Series CSV; when given the objective is forecast training, otherwise a benchmark.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Benchmark function used without --data.
    #[arg(long, default_value = "sphere")]
    pub function: String,
    /// Benchmark dimension.
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Alpha grid `start:stop:step`.
    #[arg(long = "alpha-grid", default_value = "0.1:1.0:0.1")]
    pub alpha_grid: String,
    /// Alpha-dump grid `start:stop:step`.
    #[arg(long = "dump-grid", default_value = "0.5:0.95:0.05")]
    pub dump_grid: String,
    /// Runs per cell.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Cell score: mean or min over runs.
    #[arg(long, value_enum, default_value_t = Aggregate::Mean)]
    pub aggregate: Aggregate,
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// RDV gate decay sharpness.
    #[arg(long = "decay-sharpness", default_value_t = 1.0)]
    pub decay_sharpness: f64,
    /// Consult the RDV gate once per iteration.
    #[arg(long = "per-iteration-damping")]
    pub per_iteration_damping: bool,
    #[command(flatten)]
    pub pso: PsoArgs,
    /// Concurrent cells.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "rdv-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub objective: ObjectiveArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Proposed strategy (compared first).
    #[command(flatten)]
    pub iw: IwArgs,
    /// Baseline strategy.
    #[arg(long = "baseline-iw", value_enum, default_value_t = IwKind::Constant)]
    pub baseline_iw: IwKind,
    #[command(flatten)]
    pub pso: PsoArgs,
    /// Paired trials per variant.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Significance level.
    #[arg(long = "alpha-level", default_value_t = 0.05)]
    pub alpha_level: f64,
    /// One- or two-tailed p-values.
    #[arg(long, default_value = "one")]
    pub tail: Tail,
    #[command(flatten)]
    pub stab: StabArgs,
    /// Concurrent trials.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "rdv-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark function: sphere, rastrigin or rosenbrock.
    #[arg(long, default_value = "sphere")]
    pub function: String,
    /// Dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[command(flatten)]
    pub iw: IwArgs,
    #[command(flatten)]
    pub pso: PsoArgs,
    #[command(flatten)]
    pub stab: StabArgs,
    /// Output directory.
    #[arg(long, default_value = "rdv-out")]
    pub out: PathBuf,
    /// Re-run the resolved configuration stored in a previous report.json.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 166)]
    pub len: usize,
    #[arg(long, default_value_t = 100.0)]
    pub level: f64,
    #[arg(long, default_value_t = 0.05)]
    pub slope: f64,
    #[arg(long, default_value_t = 40.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 12.0)]
    pub period: f64,
    #[arg(long = "noise-sd", default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub data: PathBuf,
    pub forecast: ForecastConfig,
    pub pso: PsoConfig,
    pub inertia: IwStrategy,
    pub stabilization: Stabilization,
    pub nmse: bool,
}

/// Fully resolved benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub function: BenchmarkFunction,
    pub dim: usize,
    pub pso: PsoConfig,
    pub inertia: IwStrategy,
    pub stabilization: Stabilization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub final_pe: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_pe_raw: Option<f64>,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    pub stabilization_iteration: Option<usize>,
    pub rdv_dampings: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub test: Option<MetricsRecord>,
    pub test_normalized: Option<MetricsRecord>,
    pub validation: Option<MetricsRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_error: Option<String>,
}

/// Run report. `config` alone reproduces every numeric output except
/// `elapsed_seconds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<C> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: C,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<ForecastMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gbest_position: Option<Vec<f64>>,
    pub convergence: ConvergenceRecord,
    pub outputs: Vec<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rdvswarm: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn read_replay<C: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<C> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let report: RunReport<C> =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(report.config)
}

fn write_trace(path: &Path, trace: &rdvswarm::ConvergenceTrace) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    trace.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

fn validate_jobs(jobs: usize) -> CliResult<()> {
    if jobs == 0 {
        return Err(CliError::Arg("--jobs: must be at least 1".into()));
    }
    Ok(())
}

pub fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let config = match &args.replay {
        Some(path) => read_replay::<TrainConfig>(path)?,
        None => {
            let forecast = args.model.config()?;
            let inertia = args.iw.strategy();
            inertia.validate()?;
            let pso = args.pso.config();
            pso.validate()?;
            TrainConfig {
                data: args.data.clone().expect("clap enforces --data"),
                forecast,
                pso,
                inertia,
                stabilization: args.stab.config(),
                nmse: args.nmse,
            }
        }
    };
    let report = train_report(&config, &args.out)?;
    println!(
        "final PE {:.9} | test {}",
        report.convergence.final_pe,
        report
            .metrics
            .as_ref()
            .and_then(|m| m.test.as_ref())
            .map(|t| format!("nrmse {} mae {} r2 {}", t.nrmse, t.mae, t.r2))
            .unwrap_or_else(|| "metrics unavailable".into())
    );
    Ok(())
}

/// Runs a resolved training configuration and writes `model.json`,
/// `trace.csv` and `report.json` into `out`.
pub fn train_report(config: &TrainConfig, out: &Path) -> CliResult<RunReport<TrainConfig>> {
    let series = load_series(&config.data)?;
    let data = prepare(series.values(), &config.forecast)?;
    let outcome = train(&data, &config.forecast, &config.pso, config.inertia)?;
    let stab = stabilization_iteration(
        &outcome.run.trace,
        config.stabilization.window,
        config.stabilization.rel_tol,
    )?;

    ensure_dir(out)?;
    let model_path = out.join("model.json");
    let trace_path = out.join("trace.csv");
    let report_path = out.join("report.json");
    ModelFile::from_parts(&outcome.network, outcome.scaler).save(&model_path)?;
    write_trace(&trace_path, &outcome.run.trace)?;

    let metrics = ForecastMetrics {
        test: outcome.test_metrics.as_ref().ok().map(|m| m.record(config.nmse)),
        test_normalized: outcome
            .test_metrics_normalized
            .as_ref()
            .ok()
            .map(|m| m.record(config.nmse)),
        validation: outcome.val_metrics.as_ref().map(|m| m.record(config.nmse)),
        test_error: outcome.test_metrics.as_ref().err().cloned(),
    };
    let report = RunReport {
        tool: "rdvswarm".into(),
        version: VERSION.into(),
        command: "train".into(),
        config: config.clone(),
        seed: config.pso.seed,
        metrics: Some(metrics),
        gbest_position: None,
        convergence: ConvergenceRecord {
            final_pe: outcome.pe,
            final_pe_raw: Some(outcome.pe_raw),
            iterations: outcome.run.iterations_run,
            elapsed_seconds: outcome.run.elapsed_seconds,
            stabilization_iteration: stab,
            rdv_dampings: outcome.run.dampings,
        },
        outputs: vec![model_path, trace_path],
    };
    write_json(&report_path, &report)?;
    Ok(report)
}

pub fn cmd_forecast(args: ForecastArgs) -> CliResult<()> {
    let (net, scaler) = ModelFile::load(&args.model)?.into_parts()?;
    let series = load_series(&args.data)?;
    let preds = net.forecast_recursive(&scaler, series.values(), args.horizon)?;
    let mut text = String::from("month,value\n");
    let mut month = series.next_month();
    for p in preds {
        text.push_str(&format!("{month},{p}\n"));
        month = month.succ();
    }
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| io_err(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_task(objective: &ObjectiveArgs, model: &ModelArgs) -> CliResult<Task> {
    match &objective.data {
        Some(path) => {
            let series = load_series(path)?;
            Ok(Task::forecast(series.values(), model.config()?)?)
        }
        None => {
            let f: BenchmarkFunction = objective.function.parse()?;
            Ok(Task::Benchmark(benchmark_objective(f, objective.dim)?))
        }
    }
}

pub fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    validate_jobs(args.jobs)?;
    let spec = SweepSpec {
        alpha_grid: parse_grid(&args.alpha_grid).map_err(|e| CliError::Arg(format!("--alpha-grid: {e}")))?,
        dump_grid: parse_grid(&args.dump_grid).map_err(|e| CliError::Arg(format!("--dump-grid: {e}")))?,
        runs_per_cell: args.runs,
        base: args.pso.config(),
        rdv_template: RdvParams {
            decay_sharpness: args.decay_sharpness,
            mode: if args.per_iteration_damping {
                DampingMode::PerIteration
            } else {
                DampingMode::PerParticle
            },
            ..RdvParams::default()
        },
        aggregate: match args.aggregate {
            Aggregate::Mean => CellAggregate::Mean,
            Aggregate::Min => CellAggregate::Min,
        },
    };
    spec.validate()?;
    let task = build_task(&args.objective, &args.model)?;
    let table = grid_sweep(&spec, &task, args.jobs)?;
    ensure_dir(&args.out)?;
    let path = args.out.join("sweep.csv");
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    table.write_csv(std::io::BufWriter::new(file))?;
    let best = table.best_cell();
    println!(
        "{} cells; best alpha {} alpha_dump {} (mean PE {}, best PE {})",
        table.cells.len(),
        best.alpha,
        best.alpha_dump,
        best.mean_pe,
        best.best_pe
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareOutput<'a> {
    tool: &'static str,
    version: &'static str,
    objective: serde_json::Value,
    spec: &'a CompareSpec,
    report: &'a rdvswarm::ComparisonReport,
}

pub fn cmd_compare(args: CompareArgs) -> CliResult<()> {
    validate_jobs(args.jobs)?;
    let proposed = args.iw.strategy();
    let baseline = args.iw.strategy_of(args.baseline_iw);
    let spec = CompareSpec {
        variants: vec![
            Variant {
                name: format!("pso-{}", proposed.name()),
                strategy: proposed,
            },
            Variant {
                name: format!("pso-{}", baseline.name()),
                strategy: baseline,
            },
        ],
        trials: args.runs,
        base: args.pso.config(),
        alpha_level: args.alpha_level,
        tail: args.tail,
        stabilization: args.stab.config(),
    };
    let task = build_task(&args.objective, &args.model)?;
    let report = compare_variants(&task, &spec, args.jobs)?;
    let objective = match &args.objective.data {
        Some(path) => serde_json::json!({
            "data": path,
            "forecast": args.model.config()?,
        }),
        None => serde_json::json!({
            "function": args.objective.function,
            "dim": args.objective.dim,
        }),
    };
    ensure_dir(&args.out)?;
    let path = args.out.join("compare.json");
    write_json(
        &path,
        &CompareOutput {
            tool: "rdvswarm",
            version: VERSION,
            objective,
            spec: &spec,
            report: &report,
        },
    )?;
    for (metric, t) in &report.t_tests {
        match t.result() {
            Some(r) => println!(
                "{metric}: mean {:.9} vs {:.9}, t {:.6}, df {}, p {:.8} ({})",
                r.mean_a,
                r.mean_b,
                r.t_stat,
                r.df,
                r.p_value,
                if r.significant {
                    "significant"
                } else {
                    "not significant"
                }
            ),
            None => println!("{metric}: degenerate"),
        }
    }
    if report.any_degenerate() {
        let names: Vec<&str> = report
            .t_tests
            .iter()
            .filter(|(_, t)| t.result().is_none())
            .map(|(k, _)| k.as_str())
            .collect();
        return Err(CliError::Degenerate(format!(
            "t-test undefined for {} (report written to {})",
            names.join(", "),
            path.display()
        )));
    }
    Ok(())
}

pub fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    let config = match &args.replay {
        Some(path) => read_replay::<BenchConfig>(path)?,
        None => {
            let function: BenchmarkFunction = args.function.parse()?;
            let inertia = args.iw.strategy();
            inertia.validate()?;
            let pso = args.pso.config();
            pso.validate()?;
            BenchConfig {
                function,
                dim: args.dim,
                pso,
                inertia,
                stabilization: args.stab.config(),
            }
        }
    };
    let report = bench_report(&config, &args.out)?;
    println!(
        "gbest fitness {:e} after {} iterations",
        report.convergence.final_pe, report.convergence.iterations
    );
    Ok(())
}

/// Runs a resolved benchmark configuration, writing `trace.csv` and
/// `report.json` into `out`.
pub fn bench_report(config: &BenchConfig, out: &Path) -> CliResult<RunReport<BenchConfig>> {
    let mut objective = benchmark_objective(config.function, config.dim)?;
    let run = run_pso(&config.pso, config.dim, &mut objective, config.inertia)?;
    let stab = if run.trace.len() >= config.stabilization.window {
        stabilization_iteration(&run.trace, config.stabilization.window, config.stabilization.rel_tol)?
    } else {
        None
    };
    ensure_dir(out)?;
    let trace_path = out.join("trace.csv");
    write_trace(&trace_path, &run.trace)?;
    let report = RunReport {
        tool: "rdvswarm".into(),
        version: VERSION.into(),
        command: "bench".into(),
        config: config.clone(),
        seed: config.pso.seed,
        metrics: None,
        gbest_position: Some(run.gbest_position.clone()),
        convergence: ConvergenceRecord {
            final_pe: run.gbest_fitness,
            final_pe_raw: None,
            iterations: run.iterations_run,
            elapsed_seconds: run.elapsed_seconds,
            stabilization_iteration: stab,
            rdv_dampings: run.dampings,
        },
        outputs: vec![trace_path],
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

pub fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let ts = synthetic_series(&SyntheticSpec {
        len: args.len,
        level: args.level,
        slope: args.slope,
        amplitude: args.amplitude,
        period: args.period,
        noise_sd: args.noise_sd,
        seed: args.seed,
    })?;
    let mut buf = Vec::new();
    ts.write_csv(&mut buf)?;
    match &args.out {
        Some(path) => fs::write(path, buf).map_err(|e| io_err(path, e)),
        None => {
            print!("{}", String::from_utf8_lossy(&buf));
            Ok(())
        }
    }
}
