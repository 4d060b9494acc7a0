//! Global-best particle swarm optimizer with pluggable inertia weight.
//!
//! Minimization throughout. One seeded ChaCha8 generator drives a run, and
//! draws are consumed in a fixed order: initialization (per particle, all
//! position coordinates then all velocity coordinates), then per iteration and
//! per particle the inertia draw (only for strategies that need one) followed
//! by `r1, r2` for each dimension in turn.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inertia::{InertiaSchedule, IwStrategy};
use crate::metrics::PeMode;
use crate::nar::{Architecture, Scratch};
use crate::series::LagDataset;

/// What to do when the objective returns NaN or an infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonFinitePolicy {
    /// Stop the run with [`Error::NonFiniteObjective`].
    #[default]
    Abort,
    /// Score the candidate `+inf` so it never becomes a personal or global best.
    Worst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub c1: f64,
    pub c2: f64,
    /// Positions are clamped to `[-position_limit, position_limit]`.
    pub position_limit: f64,
    pub init_position_range: (f64, f64),
    pub init_velocity_range: (f64, f64),
    pub seed: u64,
    #[serde(default)]
    pub non_finite: NonFinitePolicy,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            max_iterations: 100,
            c1: 2.0,
            c2: 2.0,
            position_limit: 10.0,
            init_position_range: (-1.0, 1.0),
            init_velocity_range: (-0.1, 0.1),
            seed: 42,
            non_finite: NonFinitePolicy::Abort,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 {
            return Err(Error::invalid("swarm", "swarm size must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("iters", "iteration count must be positive"));
        }
        if !(self.c1 >= 0.0 && self.c1.is_finite()) {
            return Err(Error::invalid("c1", format!("{} must be non-negative", self.c1)));
        }
        if !(self.c2 >= 0.0 && self.c2.is_finite()) {
            return Err(Error::invalid("c2", format!("{} must be non-negative", self.c2)));
        }
        if !(self.position_limit > 0.0 && self.position_limit.is_finite()) {
            return Err(Error::invalid(
                "limit",
                format!("{} must be positive", self.position_limit),
            ));
        }
        let (pl, ph) = self.init_position_range;
        if !(pl < ph) {
            return Err(Error::invalid(
                "init_position_range",
                format!("low {pl} must be below high {ph}"),
            ));
        }
        let (vl, vh) = self.init_velocity_range;
        if !(vl < vh) {
            return Err(Error::invalid(
                "init_velocity_range",
                format!("low {vl} must be below high {vh}"),
            ));
        }
        if self.position_limit < ph || self.position_limit < -pl {
            return Err(Error::invalid(
                "limit",
                format!("{} is inside the initialization range", self.position_limit),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub pbest_position: Vec<f64>,
    pub pbest_fitness: f64,
    /// Fitness of `position`.
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_fitness: f64,
    pub mean_abs_velocity: f64,
    pub inertia_weight: f64,
}

/// Per-iteration convergence record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub points: Vec<TracePoint>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_abs_velocities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_abs_velocity).collect()
    }

    pub fn best_fitness(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.best_fitness).collect()
    }

    /// `iteration,best_fitness,mean_abs_velocity,inertia_weight`, one row per iteration.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "best_fitness", "mean_abs_velocity", "inertia_weight"])
            .map_err(ser)?;
        for p in &self.points {
            w.write_record([
                p.iteration.to_string(),
                p.best_fitness.to_string(),
                p.mean_abs_velocity.to_string(),
                p.inertia_weight.to_string(),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub gbest_position: Vec<f64>,
    pub gbest_fitness: f64,
    pub trace: ConvergenceTrace,
    pub elapsed_seconds: f64,
    pub iterations_run: usize,
    /// RDV damping events, when the strategy is RDV.
    pub dampings: Option<usize>,
}

/// Something the swarm can minimize.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> f64;
}

impl<F: FnMut(&[f64]) -> f64> Objective for F {
    fn evaluate(&mut self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// `w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x)`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub fn update_velocity(v: f64, x: f64, pbest: f64, gbest: f64, w: f64, c1: f64, c2: f64, r1: f64, r2: f64) -> f64 {
    w * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)
}

/// `clamp(x + v, -limit, limit)`.
#[inline]
pub fn update_position(x: f64, v: f64, limit: f64) -> f64 {
    (x + v).clamp(-limit, limit)
}

/// Swarm state passed to observers after initialization (`iteration = None`)
/// and after every iteration.
pub struct SwarmView<'a> {
    pub iteration: Option<usize>,
    pub particles: &'a [Particle],
    pub gbest_position: &'a [f64],
    pub gbest_fitness: f64,
    pub inertia_weight: f64,
}

pub fn run_pso<O: Objective + ?Sized>(
    config: &PsoConfig,
    dim: usize,
    objective: &mut O,
    strategy: IwStrategy,
) -> Result<RunResult> {
    run_pso_observed(config, dim, objective, strategy, |_| {})
}

pub fn run_pso_observed<O, V>(
    config: &PsoConfig,
    dim: usize,
    objective: &mut O,
    strategy: IwStrategy,
    mut observe: V,
) -> Result<RunResult>
where
    O: Objective + ?Sized,
    V: FnMut(&SwarmView<'_>),
{
    config.validate()?;
    if dim == 0 {
        return Err(Error::invalid("dim", "search space dimension must be at least 1"));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut schedule = InertiaSchedule::new(strategy, config.max_iterations)?;

    let score = |value: f64, particle: usize, iteration: usize| -> Result<f64> {
        if value.is_finite() {
            Ok(value)
        } else {
            match config.non_finite {
                NonFinitePolicy::Worst => Ok(f64::INFINITY),
                NonFinitePolicy::Abort => Err(Error::NonFiniteObjective {
                    particle,
                    iteration,
                    value,
                }),
            }
        }
    };

    let (pl, ph) = config.init_position_range;
    let (vl, vh) = config.init_velocity_range;
    let mut particles = Vec::with_capacity(config.swarm_size);
    for i in 0..config.swarm_size {
        let position: Vec<f64> = (0..dim).map(|_| rng.random_range(pl..ph)).collect();
        let velocity: Vec<f64> = (0..dim).map(|_| rng.random_range(vl..vh)).collect();
        let fitness = score(objective.evaluate(&position), i, 0)?;
        particles.push(Particle {
            pbest_position: position.clone(),
            pbest_fitness: fitness,
            position,
            velocity,
            fitness,
        });
    }
    let mut best = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.fitness < particles[best].fitness {
            best = i;
        }
    }
    let mut gbest_position = particles[best].position.clone();
    let mut gbest_fitness = particles[best].fitness;
    observe(&SwarmView {
        iteration: None,
        particles: &particles,
        gbest_position: &gbest_position,
        gbest_fitness,
        inertia_weight: schedule.current(),
    });

    let mut trace = ConvergenceTrace {
        points: Vec::with_capacity(config.max_iterations),
    };
    for t in 0..config.max_iterations {
        for (i, p) in particles.iter_mut().enumerate() {
            let w = schedule.weight(t, &mut rng);
            for j in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = update_velocity(
                    p.velocity[j],
                    p.position[j],
                    p.pbest_position[j],
                    gbest_position[j],
                    w,
                    config.c1,
                    config.c2,
                    r1,
                    r2,
                );
                p.velocity[j] = v;
                p.position[j] = update_position(p.position[j], v, config.position_limit);
            }
            p.fitness = score(objective.evaluate(&p.position), i, t)?;
            if p.fitness < p.pbest_fitness {
                p.pbest_fitness = p.fitness;
                p.pbest_position.copy_from_slice(&p.position);
            }
            if p.fitness < gbest_fitness {
                gbest_fitness = p.fitness;
                gbest_position.copy_from_slice(&p.position);
            }
        }
        let total_abs: f64 = particles.iter().flat_map(|p| p.velocity.iter()).map(|v| v.abs()).sum();
        trace.points.push(TracePoint {
            iteration: t,
            best_fitness: gbest_fitness,
            mean_abs_velocity: total_abs / (particles.len() * dim) as f64,
            inertia_weight: schedule.current(),
        });
        observe(&SwarmView {
            iteration: Some(t),
            particles: &particles,
            gbest_position: &gbest_position,
            gbest_fitness,
            inertia_weight: schedule.current(),
        });
    }

    Ok(RunResult {
        gbest_position,
        gbest_fitness,
        trace,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        iterations_run: config.max_iterations,
        dampings: schedule.rdv_state().map(|s| s.dampings),
    })
}

/// Position-error fitness for training a forecaster: installs a candidate
/// parameter vector, predicts every row one step ahead and returns the
/// Euclidean norm of the residuals `target - prediction` (normalized space).
pub struct ForecastFitness<'a> {
    arch: Architecture,
    data: &'a LagDataset,
    mode: PeMode,
    scratch: Scratch,
    residuals: Vec<f64>,
}

impl<'a> ForecastFitness<'a> {
    pub fn new(arch: Architecture, data: &'a LagDataset) -> Result<Self> {
        Self::with_mode(arch, data, PeMode::Euclidean)
    }

    pub fn with_mode(arch: Architecture, data: &'a LagDataset, mode: PeMode) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("lag_dataset", "no rows to fit"));
        }
        if data.m != arch.m {
            return Err(Error::DimensionMismatch {
                expected: arch.m,
                actual: data.m,
            });
        }
        Ok(Self {
            arch,
            data,
            mode,
            scratch: Scratch::default(),
            residuals: Vec::with_capacity(data.len()),
        })
    }

    pub fn dim(&self) -> usize {
        self.arch.param_count()
    }

    /// Residuals `target - prediction` for `params`.
    pub fn residuals(&mut self, params: &[f64]) -> Result<&[f64]> {
        if params.len() != self.arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.param_count(),
                actual: params.len(),
            });
        }
        self.residuals.clear();
        for (lags, target) in self.data.inputs.iter().zip(&self.data.targets) {
            let pred = self.arch.forward_unchecked(params, lags, &mut self.scratch);
            self.residuals.push(target - pred);
        }
        Ok(&self.residuals)
    }
}

impl Objective for ForecastFitness<'_> {
    fn evaluate(&mut self, x: &[f64]) -> f64 {
        let mode = self.mode;
        let pe = match self.residuals(x) {
            Ok(r) => match mode {
                PeMode::Euclidean => r.iter().map(|d| d * d).sum::<f64>().sqrt(),
                PeMode::Literal => {
                    let s: f64 = r.iter().sum();
                    if s < 0.0 {
                        f64::INFINITY
                    } else {
                        s.sqrt()
                    }
                }
            },
            Err(_) => f64::INFINITY,
        };
        if pe.is_finite() {
            pe
        } else {
            f64::INFINITY
        }
    }
}
