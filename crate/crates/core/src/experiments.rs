//! Experiment protocols: benchmark objectives, the (alpha, alpha_dump) grid
//! sweep, paired multi-trial variant comparison and velocity stabilization.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{prepare, train, ForecastConfig, PreparedData};
use crate::inertia::{IwStrategy, RdvParams};
use crate::pso::{run_pso, ConvergenceTrace, Objective, PsoConfig};
use crate::stats::{improvement_pct, paired_t_test, summarize_runs, RunSummary, TTestResult, Tail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkFunction {
    Sphere,
    Rastrigin,
    Rosenbrock,
}

impl std::str::FromStr for BenchmarkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "rastrigin" => Ok(Self::Rastrigin),
            "rosenbrock" => Ok(Self::Rosenbrock),
            other => Err(Error::invalid(
                "function",
                format!("unknown benchmark `{other}` (sphere, rastrigin, rosenbrock)"),
            )),
        }
    }
}

/// A benchmark function bound to a dimension. Global minimum 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Benchmark {
    pub function: BenchmarkFunction,
    pub dim: usize,
}

impl Benchmark {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self.function {
            BenchmarkFunction::Sphere => x.iter().map(|v| v * v).sum(),
            BenchmarkFunction::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter()
                        .map(|v| v * v - 10.0 * (std::f64::consts::TAU * v).cos())
                        .sum::<f64>()
            }
            BenchmarkFunction::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
        }
    }
}

impl Objective for Benchmark {
    fn evaluate(&mut self, x: &[f64]) -> f64 {
        self.value(x)
    }
}

pub fn benchmark_objective(function: BenchmarkFunction, dim: usize) -> Result<Benchmark> {
    let min_dim = if function == BenchmarkFunction::Rosenbrock {
        2
    } else {
        1
    };
    if dim < min_dim {
        return Err(Error::invalid(
            "dim",
            format!("{function:?} needs dim >= {min_dim}, got {dim}"),
        ));
    }
    Ok(Benchmark { function, dim })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `trial` of cell `cell`: three chained SplitMix64 finalizer
/// rounds, `mix(mix(mix(base) ^ cell) ^ trial)`. Pure 64-bit wrapping
/// arithmetic, identical on every platform.
pub fn derive_seed(base: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ cell) ^ trial)
}

/// Parses `start:stop:step`; `stop` is included when reachable within 1e-9.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |m: &str| Error::invalid("grid", format!("`{spec}`: {m}"));
    if parts.len() == 1 {
        let v: f64 = parts[0].trim().parse().map_err(|_| bad("not a number"))?;
        return Ok(vec![v]);
    }
    if parts.len() != 3 {
        return Err(bad("expected start:stop:step"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("not a number"))?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
        return Err(bad("step must be positive and bounds finite"));
    }
    if stop < start {
        return Err(bad("stop is below start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// What a sweep or comparison optimizes.
#[derive(Debug, Clone)]
pub enum Task {
    Benchmark(Benchmark),
    Forecast {
        config: ForecastConfig,
        data: Arc<PreparedData>,
    },
}

impl Task {
    pub fn forecast(values: &[f64], config: ForecastConfig) -> Result<Self> {
        let data = Arc::new(prepare(values, &config)?);
        Ok(Task::Forecast { config, data })
    }

    /// Metric names recorded per trial, in report order.
    pub fn metric_names(&self) -> &'static [&'static str] {
        match self {
            Task::Benchmark(_) => &["fitness"],
            Task::Forecast { .. } => &["nrmse", "mae", "mape", "wape", "r2"],
        }
    }

    fn run(&self, pso: &PsoConfig, strategy: IwStrategy) -> Result<TaskRun> {
        match self {
            Task::Benchmark(b) => {
                let mut f = *b;
                let r = run_pso(pso, b.dim, &mut f, strategy)?;
                Ok(TaskRun {
                    pe: r.gbest_fitness,
                    pe_raw: None,
                    metrics: vec![r.gbest_fitness],
                    trace: r.trace,
                    elapsed_seconds: r.elapsed_seconds,
                })
            }
            Task::Forecast { config, data } => {
                let out = train(data, config, pso, strategy)?;
                let metrics = match &out.test_metrics {
                    Ok(m) => vec![m.nrmse, m.mae, m.mape.unwrap_or(f64::NAN), m.wape, m.r_squared],
                    Err(_) => vec![f64::NAN; 5],
                };
                Ok(TaskRun {
                    pe: out.pe,
                    pe_raw: Some(out.pe_raw),
                    metrics,
                    trace: out.run.trace,
                    elapsed_seconds: out.run.elapsed_seconds,
                })
            }
        }
    }
}

struct TaskRun {
    pe: f64,
    pe_raw: Option<f64>,
    metrics: Vec<f64>,
    trace: ConvergenceTrace,
    elapsed_seconds: f64,
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))
}

/// How a sweep cell's runs are reduced to one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellAggregate {
    #[default]
    Mean,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub alpha_grid: Vec<f64>,
    pub dump_grid: Vec<f64>,
    pub runs_per_cell: usize,
    pub base: PsoConfig,
    /// Sharpness and damping mode applied to every cell.
    pub rdv_template: RdvParams,
    #[serde(default)]
    pub aggregate: CellAggregate,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [("alpha-grid", &self.alpha_grid), ("dump-grid", &self.dump_grid)] {
            if grid.is_empty() {
                return Err(Error::invalid(name, "grid is empty"));
            }
            if grid.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                return Err(Error::invalid(name, "values must lie in (0, 1]"));
            }
            if grid.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid(name, "values must be strictly increasing"));
            }
        }
        if self.runs_per_cell == 0 {
            return Err(Error::invalid("runs", "need at least one run per cell"));
        }
        self.base.validate()
    }

    pub fn cell_count(&self) -> usize {
        self.alpha_grid.len() * self.dump_grid.len()
    }

    /// Cells in row-major (alpha, alpha_dump) order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.alpha_grid
            .iter()
            .flat_map(|&a| self.dump_grid.iter().map(move |&d| (a, d)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub alpha_dump: f64,
    pub mean_pe: f64,
    pub best_pe: f64,
    /// Runs that completed.
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    pub best: usize,
    pub aggregate: CellAggregate,
}

impl SweepTable {
    pub fn best_cell(&self) -> &SweepCell {
        &self.cells[self.best]
    }

    /// `alpha,alpha_dump,mean_pe,best_pe,runs`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "alpha_dump", "mean_pe", "best_pe", "runs"])
            .map_err(ser)?;
        for c in &self.cells {
            w.write_record([
                c.alpha.to_string(),
                c.alpha_dump.to_string(),
                c.mean_pe.to_string(),
                c.best_pe.to_string(),
                c.runs.to_string(),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Evaluates one cell: `runs_per_cell` seeded runs, seeds from
/// `derive_seed(base.seed, cell_index, run)`.
fn sweep_cell(spec: &SweepSpec, task: &Task, cell_index: usize, alpha: f64, dump: f64) -> Result<SweepCell> {
    let strategy = IwStrategy::Rdv(RdvParams {
        alpha,
        alpha_dump: dump,
        ..spec.rdv_template
    });
    let mut pes = Vec::with_capacity(spec.runs_per_cell);
    let mut last_err = None;
    for run in 0..spec.runs_per_cell {
        let pso = PsoConfig {
            seed: derive_seed(spec.base.seed, cell_index as u64, run as u64),
            ..spec.base.clone()
        };
        match task.run(&pso, strategy) {
            Ok(r) => pes.push(r.pe),
            Err(e) => last_err = Some(e),
        }
    }
    if pes.is_empty() {
        return Err(Error::Degenerate(format!(
            "every run of cell (alpha {alpha}, alpha_dump {dump}) failed: {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    let s = summarize_runs(&pes)?;
    Ok(SweepCell {
        alpha,
        alpha_dump: dump,
        mean_pe: pes.iter().sum::<f64>() / pes.len() as f64,
        best_pe: s.min,
        runs: pes.len(),
    })
}

pub fn grid_sweep(spec: &SweepSpec, task: &Task, jobs: usize) -> Result<SweepTable> {
    spec.validate()?;
    let cells = spec.cells();
    let pool = thread_pool(jobs)?;
    let results: Vec<Result<SweepCell>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &(a, d))| sweep_cell(spec, task, i, a, d))
            .collect()
    });
    let cells: Vec<SweepCell> = results.into_iter().collect::<Result<_>>()?;
    Ok(SweepTable {
        best: argmin_cell(&cells, spec.aggregate),
        cells,
        aggregate: spec.aggregate,
    })
}

/// Lowest score; ties go to the lexicographically smallest (alpha, alpha_dump).
pub fn argmin_cell(cells: &[SweepCell], aggregate: CellAggregate) -> usize {
    let score = |c: &SweepCell| match aggregate {
        CellAggregate::Mean => c.mean_pe,
        CellAggregate::Min => c.best_pe,
    };
    let mut best = 0;
    for (i, c) in cells.iter().enumerate().skip(1) {
        let (s, b) = (score(c), score(&cells[best]));
        let key = (c.alpha, c.alpha_dump);
        let best_key = (cells[best].alpha, cells[best].alpha_dump);
        if s < b || (s == b && key < best_key) {
            best = i;
        }
    }
    best
}

/// First iteration `t` whose window `[t, t + window)` of mean absolute
/// velocities spans at most `rel_tol` times the window mean.
pub fn stabilization_iteration(trace: &ConvergenceTrace, window: usize, rel_tol: f64) -> Result<Option<usize>> {
    stabilization_index(&trace.mean_abs_velocities(), window, rel_tol)
}

pub fn stabilization_index(velocities: &[f64], window: usize, rel_tol: f64) -> Result<Option<usize>> {
    if window < 2 {
        return Err(Error::invalid("window", "must be at least 2"));
    }
    if !(rel_tol >= 0.0) {
        return Err(Error::invalid("rel_tol", "must be non-negative"));
    }
    if velocities.len() < window {
        return Err(Error::invalid(
            "window",
            format!("trace has {} points, shorter than window {window}", velocities.len()),
        ));
    }
    Ok(velocities.windows(window).position(|w| {
        let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = w.iter().sum::<f64>() / window as f64;
        hi - lo <= rel_tol * mean
    }))
}

/// Parameters of the velocity-stabilization rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stabilization {
    pub window: usize,
    pub rel_tol: f64,
}

impl Default for Stabilization {
    fn default() -> Self {
        Self {
            window: 3,
            rel_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub strategy: IwStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    pub variants: Vec<Variant>,
    pub trials: usize,
    pub base: PsoConfig,
    pub alpha_level: f64,
    pub tail: Tail,
    pub stabilization: Stabilization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Values in the order of `ComparisonReport::metric_names`.
    pub metrics: Vec<f64>,
    pub pe: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pe_raw: Option<f64>,
    pub elapsed_seconds: f64,
    pub stabilization_iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub pe: RunSummary,
    pub elapsed_seconds: RunSummary,
    /// Over trials that stabilized; `None` when none did.
    pub stabilization_iteration: Option<RunSummary>,
    pub stabilized_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    pub strategy: IwStrategy,
    pub trials: Vec<TrialRecord>,
    pub summaries: BTreeMap<String, Option<RunSummary>>,
    pub convergence: ConvergenceSummary,
}

impl VariantReport {
    pub fn metric_column(&self, index: usize) -> Vec<f64> {
        self.trials.iter().map(|t| t.metrics[index]).collect()
    }

    pub fn pe_column(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.pe).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TTestOutcome {
    Ok(TTestResult),
    Degenerate { reason: String },
}

impl TTestOutcome {
    pub fn result(&self) -> Option<&TTestResult> {
        match self {
            TTestOutcome::Ok(r) => Some(r),
            TTestOutcome::Degenerate { .. } => None,
        }
    }
}

/// Improvement of the first variant over the second, in percent, per summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub average: Option<f64>,
}

impl Improvement {
    fn between(proposed: &RunSummary, baseline: &RunSummary) -> Self {
        Self {
            min: improvement_pct(baseline.min, proposed.min).ok(),
            max: improvement_pct(baseline.max, proposed.max).ok(),
            average: improvement_pct(baseline.mean, proposed.mean).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric_names: Vec<String>,
    pub variants: Vec<VariantReport>,
    /// First variant against second, per metric and for final PE.
    pub t_tests: BTreeMap<String, TTestOutcome>,
    pub improvements: BTreeMap<String, Improvement>,
}

impl ComparisonReport {
    pub fn any_degenerate(&self) -> bool {
        self.t_tests
            .values()
            .any(|t| matches!(t, TTestOutcome::Degenerate { .. }))
    }

    /// Report with all wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for v in &mut r.variants {
            for t in &mut v.trials {
                t.elapsed_seconds = 0.0;
            }
            v.convergence.elapsed_seconds = RunSummary {
                min: 0.0,
                max: 0.0,
                mean: 0.0,
            };
        }
        r.improvements.remove("elapsed_seconds");
        r
    }
}

/// Seed shared by every variant for trial `trial`.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(base, u64::MAX, trial as u64)
}

pub fn compare_variants(task: &Task, spec: &CompareSpec, jobs: usize) -> Result<ComparisonReport> {
    if spec.variants.len() < 2 {
        return Err(Error::invalid("variants", "need at least two variants"));
    }
    if spec.trials < 2 {
        return Err(Error::invalid("runs", "need at least two trials for a paired t-test"));
    }
    spec.base.validate()?;
    for v in &spec.variants {
        v.strategy.validate()?;
    }
    let jobs_list: Vec<(usize, usize)> = (0..spec.variants.len())
        .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let pool = thread_pool(jobs)?;
    let runs: Vec<Result<TrialRecord>> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|&(v, t)| {
                let seed = trial_seed(spec.base.seed, t);
                let pso = PsoConfig {
                    seed,
                    ..spec.base.clone()
                };
                let r = task.run(&pso, spec.variants[v].strategy)?;
                let stab = stabilization_index(
                    &r.trace.mean_abs_velocities(),
                    spec.stabilization.window,
                    spec.stabilization.rel_tol,
                )
                .ok()
                .flatten();
                Ok(TrialRecord {
                    trial: t,
                    seed,
                    metrics: r.metrics,
                    pe: r.pe,
                    pe_raw: r.pe_raw,
                    elapsed_seconds: r.elapsed_seconds,
                    stabilization_iteration: stab,
                })
            })
            .collect()
    });
    let mut runs = runs.into_iter();

    let names = task.metric_names();
    let mut variants = Vec::with_capacity(spec.variants.len());
    for v in &spec.variants {
        let trials: Vec<TrialRecord> = runs.by_ref().take(spec.trials).collect::<Result<_>>()?;
        let mut summaries = BTreeMap::new();
        for (k, name) in names.iter().enumerate() {
            let col: Vec<f64> = trials.iter().map(|t| t.metrics[k]).collect();
            let s = if col.iter().all(|x| x.is_finite()) {
                summarize_runs(&col).ok()
            } else {
                None
            };
            summaries.insert(name.to_string(), s);
        }
        let pe: Vec<f64> = trials.iter().map(|t| t.pe).collect();
        let time: Vec<f64> = trials.iter().map(|t| t.elapsed_seconds).collect();
        let stab: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.stabilization_iteration.map(|s| s as f64))
            .collect();
        let convergence = ConvergenceSummary {
            pe: summarize_runs(&pe)?,
            elapsed_seconds: summarize_runs(&time)?,
            stabilization_iteration: summarize_runs(&stab).ok(),
            stabilized_trials: stab.len(),
        };
        variants.push(VariantReport {
            name: v.name.clone(),
            strategy: v.strategy,
            trials,
            summaries,
            convergence,
        });
    }

    let (a, b) = (&variants[0], &variants[1]);
    let test = |x: &[f64], y: &[f64]| -> TTestOutcome {
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return TTestOutcome::Degenerate {
                reason: "metric undefined in at least one trial".into(),
            };
        }
        match paired_t_test(x, y, spec.alpha_level, spec.tail) {
            Ok(r) => TTestOutcome::Ok(r),
            Err(e) => TTestOutcome::Degenerate { reason: e.to_string() },
        }
    };
    let mut t_tests = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        t_tests.insert(name.to_string(), test(&a.metric_column(k), &b.metric_column(k)));
    }
    if !names.contains(&"fitness") {
        t_tests.insert("pe".into(), test(&a.pe_column(), &b.pe_column()));
    }

    let mut improvements = BTreeMap::new();
    improvements.insert(
        "pe".to_string(),
        Improvement::between(&a.convergence.pe, &b.convergence.pe),
    );
    improvements.insert(
        "elapsed_seconds".to_string(),
        Improvement::between(&a.convergence.elapsed_seconds, &b.convergence.elapsed_seconds),
    );
    if let (Some(sa), Some(sb)) = (
        &a.convergence.stabilization_iteration,
        &b.convergence.stabilization_iteration,
    ) {
        improvements.insert("stabilization_iteration".to_string(), Improvement::between(sa, sb));
    }

    Ok(ComparisonReport {
        metric_names: names.iter().map(|s| s.to_string()).collect(),
        variants,
        t_tests,
        improvements,
    })
}
