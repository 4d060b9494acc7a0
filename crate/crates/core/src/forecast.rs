//! Training pipeline: split, scale, lag-embed, fit network weights with the
//! swarm, and score the held-out segments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inertia::IwStrategy;
use crate::metrics::{compute_metrics, MetricsReport, PeMode};
use crate::nar::{Architecture, NarNetwork, Scratch};
use crate::pso::{run_pso, ForecastFitness, NonFinitePolicy, PsoConfig, RunResult};
use crate::series::{lag_rows_for_range, make_lag_dataset, random_row_partition, LagDataset, Scaler, SplitRatios};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitMode {
    /// Contiguous train, validation, test segments in time order.
    #[default]
    Chronological,
    /// Lag rows shuffled with `seed` before partitioning.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub architecture: Architecture,
    pub split: SplitRatios,
    #[serde(default)]
    pub split_mode: SplitMode,
    #[serde(default)]
    pub pe_mode: PeMode,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::default(),
            split: SplitRatios::default(),
            split_mode: SplitMode::Chronological,
            pe_mode: PeMode::Euclidean,
        }
    }
}

/// A segment in normalized space with its raw-scale targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub rows: LagDataset,
    pub raw_targets: Vec<f64>,
}

/// Series prepared for training: fitted scaler and three lag segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub scaler: Scaler,
    pub train: Segment,
    pub val: Segment,
    pub test: Segment,
}

pub fn prepare(values: &[f64], config: &ForecastConfig) -> Result<PreparedData> {
    let m = config.architecture.m;
    match config.split_mode {
        SplitMode::Chronological => {
            let (n_train, n_val, _) = config.split.sizes(values.len())?;
            if n_train <= m {
                return Err(Error::InsufficientHistory {
                    needed: m,
                    available: n_train,
                });
            }
            let scaler = Scaler::fit(&values[..n_train])?;
            let norm = scaler.transform_all(values);
            let segment = |rows: LagDataset, lo: usize, hi: usize| Segment {
                rows,
                raw_targets: values[lo..hi].to_vec(),
            };
            let train = segment(make_lag_dataset(&norm[..n_train], m)?, m, n_train);
            let val_end = n_train + n_val;
            let val = segment(lag_rows_for_range(&norm, m, n_train, val_end)?, n_train, val_end);
            let test = segment(
                lag_rows_for_range(&norm, m, val_end, values.len())?,
                val_end,
                values.len(),
            );
            Ok(PreparedData {
                scaler,
                train,
                val,
                test,
            })
        }
        SplitMode::Random { seed } => {
            let all = make_lag_dataset(values, m)?;
            let (tr, va, te) = random_row_partition(all.len(), config.split, seed)?;
            let train_values: Vec<f64> = tr
                .iter()
                .flat_map(|&i| all.inputs[i].iter().copied().chain(std::iter::once(all.targets[i])))
                .collect();
            let scaler = Scaler::fit(&train_values)?;
            let pick = |idx: &[usize]| Segment {
                rows: LagDataset {
                    inputs: idx.iter().map(|&i| scaler.transform_all(&all.inputs[i])).collect(),
                    targets: idx.iter().map(|&i| scaler.transform(all.targets[i])).collect(),
                    m,
                },
                raw_targets: idx.iter().map(|&i| all.targets[i]).collect(),
            };
            Ok(PreparedData {
                scaler,
                train: pick(&tr),
                val: pick(&va),
                test: pick(&te),
            })
        }
    }
}

/// Raw-scale one-step predictions for every row of a segment.
pub fn predict_segment(net: &NarNetwork, scaler: &Scaler, segment: &Segment) -> Vec<f64> {
    let arch = net.architecture();
    let mut scratch = Scratch::default();
    segment
        .rows
        .inputs
        .iter()
        .map(|lags| scaler.invert(arch.forward_unchecked(net.params(), lags, &mut scratch)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub network: NarNetwork,
    pub scaler: Scaler,
    pub run: RunResult,
    /// Final position error in normalized space (the fitness value).
    pub pe: f64,
    /// The same residual norm measured in raw units.
    pub pe_raw: f64,
    pub val_metrics: Option<MetricsReport>,
    pub test_metrics: Result<MetricsReport, String>,
    /// Test metrics computed in normalized space.
    pub test_metrics_normalized: Result<MetricsReport, String>,
    pub test_predictions: Vec<f64>,
}

/// Trains the network weights on the training rows with a PSO run. Fitness
/// overflow scores the candidate worst instead of aborting.
pub fn train(
    data: &PreparedData,
    config: &ForecastConfig,
    pso: &PsoConfig,
    strategy: IwStrategy,
) -> Result<TrainOutcome> {
    let arch = config.architecture.clone();
    let mut fitness = ForecastFitness::with_mode(arch.clone(), &data.train.rows, config.pe_mode)?;
    let pso = PsoConfig {
        non_finite: NonFinitePolicy::Worst,
        ..pso.clone()
    };
    let run = run_pso(&pso, fitness.dim(), &mut fitness, strategy)?;
    if !run.gbest_fitness.is_finite() {
        return Err(Error::Degenerate(
            "every candidate network produced non-finite output".into(),
        ));
    }
    let network = NarNetwork::new(arch, run.gbest_position.clone())?;
    let scaler = data.scaler;

    let train_pred = predict_segment(&network, &scaler, &data.train);
    let pe_raw = data
        .train
        .raw_targets
        .iter()
        .zip(&train_pred)
        .map(|(y, p)| (y - p) * (y - p))
        .sum::<f64>()
        .sqrt();

    let val_pred = predict_segment(&network, &scaler, &data.val);
    let val_metrics = compute_metrics(&data.val.raw_targets, &val_pred).ok();
    let test_predictions = predict_segment(&network, &scaler, &data.test);
    let test_metrics = compute_metrics(&data.test.raw_targets, &test_predictions).map_err(|e| e.to_string());
    let test_norm: Vec<f64> = test_predictions.iter().map(|&p| scaler.transform(p)).collect();
    let test_metrics_normalized = compute_metrics(&data.test.rows.targets, &test_norm).map_err(|e| e.to_string());

    Ok(TrainOutcome {
        network,
        scaler,
        pe: run.gbest_fitness,
        pe_raw,
        run,
        val_metrics,
        test_metrics,
        test_metrics_normalized,
        test_predictions,
    })
}
