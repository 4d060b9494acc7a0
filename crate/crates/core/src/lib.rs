//! Particle swarm optimization with a random descending velocity (RDV)
//! inertia weight, lag-based neural forecasters trained by the swarm, accuracy
//! metrics, significance tests and the experiment protocols built on them.

pub mod error;
pub mod experiments;
pub mod forecast;
pub mod inertia;
pub mod metrics;
pub mod nar;
pub mod pso;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use experiments::{
    benchmark_objective, compare_variants, derive_seed, grid_sweep, parse_grid, stabilization_iteration, Benchmark,
    BenchmarkFunction, CompareSpec, ComparisonReport, Stabilization, SweepSpec, SweepTable, Task, Variant,
};
pub use forecast::{ForecastConfig, SplitMode};
pub use inertia::{DampingMode, InertiaSchedule, IwStrategy, RdvParams, RdvState};
pub use metrics::{compute_metrics, position_error, MetricsReport, PeMode};
pub use nar::{Activation, Activations, Architecture, ModelFile, NarNetwork};
pub use pso::{run_pso, ConvergenceTrace, ForecastFitness, NonFinitePolicy, Objective, PsoConfig, RunResult};
pub use series::{load_series, Scaler, SplitRatios, TimeSeries};
pub use stats::{paired_t_test, summarize_runs, RunSummary, TTestResult, Tail};
