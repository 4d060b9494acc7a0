//! Lag-based feed-forward forecaster (nonlinear autoregressive network).
//!
//! Each neuron computes `S = sum(w_i * x_i) - theta` and applies its layer's
//! activation. Parameters live in one flat vector so a particle position can
//! be installed directly: layer by layer, all weights ordered by destination
//! neuron then source, followed by that layer's thresholds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Scaler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    /// Threshold unit: 1 for `S > 0`, else 0.
    Step,
}

impl Activation {
    #[inline]
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Activation::Identity => s,
            Activation::Tanh => s.tanh(),
            Activation::Step => {
                if s > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "step" => Ok(Activation::Step),
            other => Err(format!("unknown activation `{other}` (identity, tanh, step)")),
        }
    }
}

/// Hidden and output activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activations {
    pub hidden: Activation,
    pub output: Activation,
}

impl Default for Activations {
    fn default() -> Self {
        Self {
            hidden: Activation::Tanh,
            output: Activation::Identity,
        }
    }
}

/// Network shape without parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub m: usize,
    pub hidden_sizes: Vec<usize>,
    pub activations: Activations,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            m: 12,
            hidden_sizes: vec![10],
            activations: Activations::default(),
        }
    }
}

pub fn param_count(m: usize, hidden_sizes: &[usize]) -> usize {
    layer_widths(m, hidden_sizes)
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

fn layer_widths(m: usize, hidden_sizes: &[usize]) -> Vec<usize> {
    let mut widths = Vec::with_capacity(hidden_sizes.len() + 2);
    widths.push(m);
    widths.extend_from_slice(hidden_sizes);
    widths.push(1);
    widths
}

impl Architecture {
    pub fn new(m: usize, hidden_sizes: Vec<usize>, activations: Activations) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("lags", "lag count must be at least 1"));
        }
        if hidden_sizes.contains(&0) {
            return Err(Error::invalid("hidden", "layer widths must be at least 1"));
        }
        Ok(Self {
            m,
            hidden_sizes,
            activations,
        })
    }

    pub fn param_count(&self) -> usize {
        param_count(self.m, &self.hidden_sizes)
    }

    pub fn widths(&self) -> Vec<usize> {
        layer_widths(self.m, &self.hidden_sizes)
    }

    /// Evaluates the network with an external parameter slice. `scratch` is
    /// reused between calls to avoid allocation in fitness loops.
    pub fn forward_with(&self, params: &[f64], lags: &[f64], scratch: &mut Scratch) -> Result<f64> {
        if lags.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: lags.len(),
            });
        }
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        Ok(self.forward_unchecked(params, lags, scratch))
    }

    pub(crate) fn forward_unchecked(&self, params: &[f64], lags: &[f64], scratch: &mut Scratch) -> f64 {
        let Scratch { a, b } = scratch;
        a.clear();
        a.extend_from_slice(lags);
        let layers = self.hidden_sizes.len() + 1;
        let mut offset = 0;
        let mut fan_in = self.m;
        for layer in 0..layers {
            let (fan_out, act) = if layer < self.hidden_sizes.len() {
                (self.hidden_sizes[layer], self.activations.hidden)
            } else {
                (1, self.activations.output)
            };
            let weights = &params[offset..offset + fan_in * fan_out];
            let thresholds = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            b.clear();
            for (row, theta) in weights.chunks_exact(fan_in).zip(thresholds) {
                let s: f64 = row.iter().zip(a.iter()).map(|(w, x)| w * x).sum::<f64>() - theta;
                b.push(act.apply(s));
            }
            offset += fan_in * fan_out + fan_out;
            fan_in = fan_out;
            std::mem::swap(a, b);
        }
        a[0]
    }
}

/// Reusable activation buffers.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// A network with installed parameters. Immutable; [`NarNetwork::with_params`]
/// returns a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct NarNetwork {
    arch: Architecture,
    params: Vec<f64>,
}

impl NarNetwork {
    /// All-zero parameters.
    pub fn zeros(arch: Architecture) -> Self {
        let params = vec![0.0; arch.param_count()];
        Self { arch, params }
    }

    pub fn new(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        NarNetwork::zeros(arch).with_params(&params)
    }

    pub fn with_params(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.param_count(),
                actual: flat.len(),
            });
        }
        if flat.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("params", "parameters must be finite"));
        }
        Ok(Self {
            arch: self.arch.clone(),
            params: flat.to_vec(),
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn m(&self) -> usize {
        self.arch.m
    }

    /// Forward pass on normalized lags, oldest first.
    pub fn forward(&self, lags: &[f64]) -> Result<f64> {
        self.arch.forward_with(&self.params, lags, &mut Scratch::default())
    }

    /// Normalizes the last `m` raw values, runs the network and maps the
    /// output back to raw scale.
    pub fn predict_one_step(&self, scaler: &Scaler, history: &[f64]) -> Result<f64> {
        let m = self.arch.m;
        if history.len() < m {
            return Err(Error::InsufficientHistory {
                needed: m - 1,
                available: history.len(),
            });
        }
        let lags = scaler.transform_all(&history[history.len() - m..]);
        Ok(scaler.invert(self.forward(&lags)?))
    }

    /// Multi-step forecast feeding each prediction back as the newest lag.
    pub fn forecast_recursive(&self, scaler: &Scaler, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        let m = self.arch.m;
        if history.len() < m {
            return Err(Error::InsufficientHistory {
                needed: m - 1,
                available: history.len(),
            });
        }
        let mut window: Vec<f64> = history[history.len() - m..].to_vec();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next = self.predict_one_step(scaler, &window)?;
            out.push(next);
            window.remove(0);
            window.push(next);
        }
        Ok(out)
    }
}

/// On-disk model: architecture, parameters and the fitted scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub m: usize,
    pub hidden_sizes: Vec<usize>,
    pub activations: Activations,
    pub params: Vec<f64>,
    pub scaler: Scaler,
}

impl ModelFile {
    pub fn from_parts(net: &NarNetwork, scaler: Scaler) -> Self {
        let arch = net.architecture();
        Self {
            m: arch.m,
            hidden_sizes: arch.hidden_sizes.clone(),
            activations: arch.activations,
            params: net.params().to_vec(),
            scaler,
        }
    }

    pub fn into_parts(self) -> Result<(NarNetwork, Scaler)> {
        let arch = Architecture::new(self.m, self.hidden_sizes, self.activations)?;
        let scaler = Scaler::new(self.scaler.min, self.scaler.max)?;
        Ok((NarNetwork::new(arch, self.params)?, scaler))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
