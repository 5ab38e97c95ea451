//! Classical building blocks with hand-written backward passes.
//!
//! Every parametrised block exposes a flat view of its trainable values and
//! accumulates gradients into a caller-provided slice with the same layout.

mod dense;
mod loss;
mod lstm;
mod optim;

pub use dense::{ffnn_backward, ffnn_forward, DenseCache, DenseLayer, Ffnn};
pub use loss::{loss, loss_grad, rmse, LossKind};
pub use lstm::{Lstm, LstmCache, LstmLayer, LstmStep};
pub use optim::{Optimizer, OptimizerKind};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative given both the pre-activation and the activated value.
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Tanh => 1.0 - out * out,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `n` draws from `U(-1/√fan_in, 1/√fan_in)`.
pub fn uniform_fan_in<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, n: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Named block of trainable values in a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(default)]
    pub quantum: bool,
}

impl ParamGroup {
    pub fn classical(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
            quantum: false,
        }
    }

    pub fn quantum(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
            quantum: true,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter dump plus the manifest describing its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheckpoint {
    pub manifest: Vec<ParamGroup>,
    pub values: Vec<f64>,
}

impl ParamCheckpoint {
    pub fn new(manifest: Vec<ParamGroup>, values: Vec<f64>) -> Result<Self> {
        let total: usize = manifest.iter().map(ParamGroup::len).sum();
        shape_check("checkpoint values", total, values.len())?;
        Ok(Self { manifest, values })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: ParamCheckpoint = serde_json::from_str(s)?;
        Self::new(c.manifest, c.values)
    }
}
