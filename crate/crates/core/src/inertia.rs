//! Inertia-weight strategies.
//!
//! The random descending velocity (RDV) schedule keeps a speed `alpha` that
//! serves directly as the inertia weight. Each query compares a decaying gate
//! `delta = exp(-k * t / T)` with a uniform draw; when the draw exceeds the
//! gate, `alpha` is multiplied by `alpha_dump`. Early in a run the gate sits
//! near 1 and damping is rare, late in a run it is frequent.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate value at `iteration` for a run of `max_iterations`, with decay
/// sharpness `k` (1 gives `exp(-t/T)`).
pub fn delta_at_sharp(iteration: usize, max_iterations: usize, k: f64) -> f64 {
    (-k * iteration as f64 / max_iterations as f64).exp()
}

/// `exp(-iteration / max_iterations)`.
pub fn delta_at(iteration: usize, max_iterations: usize) -> f64 {
    delta_at_sharp(iteration, max_iterations, 1.0)
}

/// When the RDV schedule is consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingMode {
    /// Once per particle per iteration (the damping check sits inside the particle loop).
    #[default]
    PerParticle,
    /// Once per iteration, shared by every particle.
    PerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdvParams {
    pub alpha: f64,
    pub alpha_dump: f64,
    #[serde(default = "one")]
    pub decay_sharpness: f64,
    #[serde(default)]
    pub mode: DampingMode,
}

fn one() -> f64 {
    1.0
}

impl Default for RdvParams {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            alpha_dump: 0.9,
            decay_sharpness: 1.0,
            mode: DampingMode::PerParticle,
        }
    }
}

impl RdvParams {
    pub fn new(alpha: f64, alpha_dump: f64) -> Self {
        Self {
            alpha,
            alpha_dump,
            ..Self::default()
        }
    }
}

/// Mutable RDV state owned by one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdvState {
    pub alpha: f64,
    pub alpha_dump: f64,
    pub max_iterations: usize,
    pub decay_sharpness: f64,
    /// Number of damping events so far.
    pub dampings: usize,
}

impl RdvState {
    pub fn new(params: &RdvParams, max_iterations: usize) -> Result<Self> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(params.alpha) {
            return Err(Error::invalid("alpha", format!("{} not in (0, 1]", params.alpha)));
        }
        if !unit(params.alpha_dump) {
            return Err(Error::invalid(
                "alpha-dump",
                format!("{} not in (0, 1]", params.alpha_dump),
            ));
        }
        if !(params.decay_sharpness > 0.0 && params.decay_sharpness.is_finite()) {
            return Err(Error::invalid("decay-sharpness", "must be positive"));
        }
        if max_iterations == 0 {
            return Err(Error::invalid("iters", "must be positive"));
        }
        Ok(Self {
            alpha: params.alpha,
            alpha_dump: params.alpha_dump,
            max_iterations,
            decay_sharpness: params.decay_sharpness,
            dampings: 0,
        })
    }
}

/// One RDV step: damp `alpha` when the gate falls below the draw, then use
/// `alpha` as the weight.
pub fn rdv_weight(state: RdvState, iteration: usize, rand_draw: f64) -> (f64, RdvState) {
    let mut next = state;
    let delta = delta_at_sharp(iteration, state.max_iterations, state.decay_sharpness);
    if delta < rand_draw {
        let damped = state.alpha * state.alpha_dump;
        // Keep alpha strictly positive once it reaches the normal-float floor.
        if damped >= f64::MIN_POSITIVE {
            next.alpha = damped;
        }
        next.dampings += 1;
    }
    (next.alpha, next)
}

/// Serializable strategy selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "iw", rename_all = "snake_case")]
pub enum IwStrategy {
    Constant {
        w: f64,
    },
    #[serde(rename = "linear")]
    LinearDecreasing {
        w_max: f64,
        w_min: f64,
    },
    #[serde(rename = "random")]
    RandomUniform,
    Rdv(RdvParams),
}

impl Default for IwStrategy {
    fn default() -> Self {
        IwStrategy::Rdv(RdvParams::default())
    }
}

impl IwStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IwStrategy::Constant { w } => {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::invalid("w", format!("constant weight {w} must be positive")));
                }
            }
            IwStrategy::LinearDecreasing { w_max, w_min } => {
                if w_min > w_max {
                    return Err(Error::invalid("w-min", format!("w_min {w_min} exceeds w_max {w_max}")));
                }
                if !(w_min > 0.0 && w_max.is_finite()) {
                    return Err(Error::invalid("w-min", "weights must be positive and finite"));
                }
            }
            IwStrategy::RandomUniform => {}
            IwStrategy::Rdv(p) => {
                RdvState::new(&p, 1)?;
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            IwStrategy::Constant { .. } => "constant",
            IwStrategy::LinearDecreasing { .. } => "linear",
            IwStrategy::RandomUniform => "random",
            IwStrategy::Rdv(_) => "rdv",
        }
    }
}

/// Weight for the stateless strategies.
pub fn baseline_weight(strategy: &IwStrategy, iteration: usize, max_iterations: usize, rand_draw: f64) -> Result<f64> {
    match *strategy {
        IwStrategy::Constant { w } => Ok(w),
        IwStrategy::LinearDecreasing { w_max, w_min } => {
            if w_min > w_max {
                return Err(Error::invalid("w-min", format!("w_min {w_min} exceeds w_max {w_max}")));
            }
            Ok(w_max - (w_max - w_min) * iteration as f64 / max_iterations as f64)
        }
        IwStrategy::RandomUniform => Ok(rand_draw),
        IwStrategy::Rdv(_) => Err(Error::invalid("iw", "rdv is stateful; use InertiaSchedule")),
    }
}

/// Per-run weight generator. Only strategies that need randomness consume
/// draws from the run's generator, so `Constant` leaves the stream untouched.
#[derive(Debug, Clone)]
pub struct InertiaSchedule {
    strategy: IwStrategy,
    max_iterations: usize,
    rdv: Option<RdvState>,
    current_iteration: Option<usize>,
    current_weight: f64,
    queries: usize,
}

impl InertiaSchedule {
    pub fn new(strategy: IwStrategy, max_iterations: usize) -> Result<Self> {
        strategy.validate()?;
        let rdv = match strategy {
            IwStrategy::Rdv(p) => Some(RdvState::new(&p, max_iterations)?),
            _ => None,
        };
        let initial = match strategy {
            IwStrategy::Constant { w } => w,
            IwStrategy::LinearDecreasing { w_max, .. } => w_max,
            IwStrategy::RandomUniform => 0.0,
            IwStrategy::Rdv(p) => p.alpha,
        };
        Ok(Self {
            strategy,
            max_iterations,
            rdv,
            current_iteration: None,
            current_weight: initial,
            queries: 0,
        })
    }

    /// Weight for the next particle update at `iteration`.
    pub fn weight<R: Rng + ?Sized>(&mut self, iteration: usize, rng: &mut R) -> f64 {
        let fresh_iteration = self.current_iteration != Some(iteration);
        self.current_iteration = Some(iteration);
        let w = match self.strategy {
            IwStrategy::Constant { w } => w,
            IwStrategy::LinearDecreasing { w_max, w_min } => {
                w_max - (w_max - w_min) * iteration as f64 / self.max_iterations as f64
            }
            IwStrategy::RandomUniform => rng.random::<f64>(),
            IwStrategy::Rdv(p) => {
                let state = self.rdv.as_mut().expect("rdv state");
                if p.mode == DampingMode::PerParticle || fresh_iteration {
                    let (w, next) = rdv_weight(*state, iteration, rng.random::<f64>());
                    *state = next;
                    self.queries += 1;
                    w
                } else {
                    state.alpha
                }
            }
        };
        self.current_weight = w;
        w
    }

    /// Most recently issued weight.
    pub fn current(&self) -> f64 {
        self.current_weight
    }

    pub fn rdv_state(&self) -> Option<&RdvState> {
        self.rdv.as_ref()
    }

    /// Number of RDV gate evaluations so far.
    pub fn rdv_queries(&self) -> usize {
        self.queries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_endpoints() {
        assert_eq!(delta_at(0, 100), 1.0);
        assert!((delta_at(100, 100) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((delta_at(100, 100) - 0.367879).abs() < 1e-6);
        for t in 0..100 {
            assert!(delta_at(t + 1, 100) < delta_at(t, 100));
        }
        assert!(delta_at_sharp(100, 100, 5.0) < 0.01);
    }

    #[test]
    fn rdv_examples() {
        let params = RdvParams::new(0.4, 0.9);
        // delta = 0.2 at iteration t with exp(-t/T) = 0.2
        let mut state = RdvState::new(&params, 1000).unwrap();
        let t_low = (-(0.2f64).ln() * 1000.0).round() as usize;
        let (w, next) = rdv_weight(state, t_low, 0.7);
        assert!((w - 0.36).abs() < 1e-15);
        assert!((next.alpha - 0.36).abs() < 1e-15);

        let t_high = (-(0.9f64).ln() * 1000.0).round() as usize;
        let (w, next) = rdv_weight(state, t_high, 0.5);
        assert_eq!(w, 0.4);
        assert_eq!(next.alpha, 0.4);
        assert_eq!(next.dampings, 0);

        for _ in 0..3 {
            state = rdv_weight(state, 1000, 0.99).1;
        }
        assert_eq!(state.dampings, 3);
        assert!((state.alpha - 0.2916).abs() < 1e-15);
    }

    #[test]
    fn rdv_state_validation() {
        assert!(RdvState::new(&RdvParams::new(0.0, 0.9), 10).is_err());
        assert!(RdvState::new(&RdvParams::new(0.4, 1.5), 10).is_err());
        assert!(RdvState::new(&RdvParams::new(0.4, 0.9), 0).is_err());
        assert!(RdvState::new(&RdvParams::new(1.0, 1.0), 10).is_ok());
    }

    #[test]
    fn alpha_stays_positive_under_long_runs() {
        let mut state = RdvState::new(&RdvParams::new(0.4, 0.5), 10).unwrap();
        for _ in 0..5000 {
            state = rdv_weight(state, 10, 0.999).1;
        }
        assert!(state.alpha > 0.0);
    }

    #[test]
    fn baseline_examples() {
        let c = IwStrategy::Constant { w: 1.0 };
        assert_eq!(baseline_weight(&c, 37, 100, 0.2).unwrap(), 1.0);
        let l = IwStrategy::LinearDecreasing { w_max: 0.9, w_min: 0.4 };
        assert!((baseline_weight(&l, 50, 100, 0.0).unwrap() - 0.65).abs() < 1e-15);
        assert_eq!(baseline_weight(&IwStrategy::RandomUniform, 3, 100, 0.37).unwrap(), 0.37);
        let bad = IwStrategy::LinearDecreasing { w_max: 0.4, w_min: 0.9 };
        assert!(baseline_weight(&bad, 0, 10, 0.0).is_err());
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_schedule_consumes_no_randomness() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let mut s = InertiaSchedule::new(IwStrategy::Constant { w: 1.0 }, 10).unwrap();
        for t in 0..10 {
            s.weight(t, &mut a);
        }
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn per_iteration_mode_queries_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = RdvParams {
            mode: DampingMode::PerIteration,
            ..RdvParams::default()
        };
        let mut s = InertiaSchedule::new(IwStrategy::Rdv(p), 20).unwrap();
        for t in 0..20 {
            let first = s.weight(t, &mut rng);
            for _ in 0..5 {
                assert_eq!(s.weight(t, &mut rng), first);
            }
        }
        assert_eq!(s.rdv_queries(), 20);
    }

    #[test]
    fn strategy_json_shape() {
        let json = serde_json::to_string(&IwStrategy::Rdv(RdvParams::default())).unwrap();
        assert_eq!(
            json,
            r#"{"iw":"rdv","alpha":0.4,"alpha_dump":0.9,"decay_sharpness":1.0,"mode":"per_particle"}"#
        );
        let json = serde_json::to_string(&IwStrategy::LinearDecreasing { w_max: 0.9, w_min: 0.4 }).unwrap();
        assert_eq!(json, r#"{"iw":"linear","w_max":0.9,"w_min":0.4}"#);
        let back: IwStrategy = serde_json::from_str(r#"{"iw":"rdv","alpha":0.3,"alpha_dump":0.95}"#).unwrap();
        assert_eq!(back, IwStrategy::Rdv(RdvParams::new(0.3, 0.95)));
    }
}
