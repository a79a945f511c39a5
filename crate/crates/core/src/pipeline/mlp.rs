//! Inference for pre-trained fully connected classifiers with a two-way softmax head.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::FeatureSpace;
use crate::predictor::Predictor;

pub const MLP_FORMAT: &str = "fourier-shap/mlp";
/// Probabilities are clamped to `[ε, 1 − ε]` before the logit.
pub const LOGIT_EPS: f64 = 1e-7;

/// `log(p / (1 − p))` after clamping `p` to `[ε, 1 − ε]`.
pub fn logit(p: f64) -> f64 {
    let q = p.clamp(LOGIT_EPS, 1.0 - LOGIT_EPS);
    if q != p {
        warn!("probability {p} clamped to {q} before logit");
    }
    (q / (1.0 - q)).ln()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerActivation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl LayerActivation {
    fn apply(self, v: f64) -> f64 {
        match self {
            LayerActivation::Identity => v,
            LayerActivation::Relu => v.max(0.0),
            LayerActivation::Tanh => v.tanh(),
            LayerActivation::Sigmoid => sigmoid(v),
        }
    }
}

/// Input map from discrete states to the network input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputEncoding {
    /// Concatenated one-hot blocks, one per feature.
    #[default]
    OneHot,
    /// The state index of each feature as a real number.
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// `out × in`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: LayerActivation,
}

/// Weights file. The last layer must have two outputs (pre-softmax scores).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpWeights {
    pub format: String,
    pub cardinalities: Vec<usize>,
    #[serde(default)]
    pub encoding: InputEncoding,
    pub layers: Vec<Layer>,
}

impl MlpWeights {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let w: MlpWeights =
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("MLP weights: {e}")))?;
        w.validate()?;
        Ok(w)
    }

    pub fn input_dim(&self) -> usize {
        match self.encoding {
            InputEncoding::OneHot => self.cardinalities.iter().sum(),
            InputEncoding::Ordinal => self.cardinalities.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MLP_FORMAT {
            return Err(Error::Schema(format!("unsupported weights format `{}`", self.format)));
        }
        if self.layers.is_empty() {
            return Err(Error::Schema("network has no layers".into()));
        }
        let mut width = self.input_dim();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.bias.len() {
                return Err(Error::Schema(format!(
                    "layer {l}: {} weight rows but {} biases",
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
            if let Some(r) = layer.weights.iter().position(|row| row.len() != width) {
                return Err(Error::Schema(format!(
                    "layer {l}, row {r}: expected {width} inputs, found {}",
                    layer.weights[r].len()
                )));
            }
            let finite = layer.weights.iter().flatten().chain(&layer.bias).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Schema(format!("layer {l} has non-finite parameters")));
            }
            width = layer.bias.len();
        }
        if width != 2 {
            return Err(Error::Schema(format!("output layer has {width} units; expected 2")));
        }
        Ok(())
    }

    fn encode(&self, x: &[usize]) -> Vec<f64> {
        let mut v = vec![0.0; self.input_dim()];
        match self.encoding {
            InputEncoding::OneHot => {
                let mut offset = 0;
                for (&xi, &m) in x.iter().zip(&self.cardinalities) {
                    v[offset + xi] = 1.0;
                    offset += m;
                }
            }
            InputEncoding::Ordinal => {
                for (o, &xi) in v.iter_mut().zip(x) {
                    *o = xi as f64;
                }
            }
        }
        v
    }

    /// Pre-softmax output scores `(score₀, score₁)`.
    pub fn scores(&self, x: &[usize]) -> Vec<f64> {
        let mut a = self.encode(x);
        for layer in &self.layers {
            a = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, b)| layer.activation.apply(row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + b))
                .collect();
        }
        a
    }
}

/// `log(p₁/p₀) = score₁ − score₀` from the pre-softmax scores.
pub fn mlp_logit(weights: &MlpWeights, x: &[usize]) -> Result<f64> {
    if x.len() != weights.cardinalities.len()
        || x.iter().zip(&weights.cardinalities).any(|(&v, &m)| v >= m)
    {
        return Err(Error::Schema(format!("state {x:?} does not fit the network input")));
    }
    let s = weights.scores(x);
    let z = s[1] - s[0];
    if !z.is_finite() {
        return Err(Error::Numeric(format!("network output at {x:?} is not finite")));
    }
    Ok(z)
}

/// An [`MlpWeights`] network exposed as a logit-scale predictor.
#[derive(Debug, Clone)]
pub struct MlpPredictor {
    weights: MlpWeights,
    space: FeatureSpace,
}

impl MlpPredictor {
    pub fn new(weights: MlpWeights) -> Result<Self> {
        weights.validate()?;
        let space = FeatureSpace::new(weights.cardinalities.clone())?;
        Ok(MlpPredictor { weights, space })
    }

    pub fn weights(&self) -> &MlpWeights {
        &self.weights
    }
}

impl Predictor for MlpPredictor {
    fn space(&self) -> &FeatureSpace {
        &self.space
    }

    fn value(&self, x: &[usize]) -> f64 {
        let s = self.weights.scores(x);
        s[1] - s[0]
    }
}
