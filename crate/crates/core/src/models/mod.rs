//! The four calibrators behind one interface.

mod presets;
mod qlstm;
mod train;

pub use presets::{Preset, PresetName};
pub use qlstm::{Qlstm, QlstmStep};
pub use train::{
    batch_gradient, evaluate_model, train, Calibrator, Metrics, ModelCheckpoint, Prediction, Sample, TrainConfig,
    TrainHistory,
};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::neural::{Activation, Ffnn, Lstm, ParamGroup};
use crate::vqc::{evaluate, shift_grad, Axis, CircuitTemplate, ParamVector, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VqrArchitecture {
    /// One embedding, then every entangling layer.
    Linear,
    /// Embedding re-uploaded before each entangling layer.
    NonLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    Ffnn {
        hidden: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
    Lstm {
        hidden: usize,
        layers: usize,
    },
    Vqr {
        qubits: usize,
        layers: usize,
        #[serde(default = "default_architecture")]
        architecture: VqrArchitecture,
        #[serde(default = "default_axis")]
        axis: Axis,
        #[serde(default)]
        transform: Transform,
    },
    Qlstm {
        qubits: usize,
        layers: usize,
        hidden: usize,
        #[serde(default)]
        per_gate_fc_out: bool,
    },
}

fn default_activation() -> Activation {
    Activation::Tanh
}

fn default_architecture() -> VqrArchitecture {
    VqrArchitecture::Linear
}

fn default_axis() -> Axis {
    Axis::X
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Ffnn { .. } => "ffnn",
            ModelConfig::Lstm { .. } => "lstm",
            ModelConfig::Vqr { .. } => "vqr",
            ModelConfig::Qlstm { .. } => "qlstm",
        }
    }

    /// Recurrent models consume windows of PM2.5 only.
    pub fn default_features(&self) -> FeatureSet {
        if self.is_sequence() {
            FeatureSet::PmOnly
        } else {
            FeatureSet::All
        }
    }

    pub fn is_sequence(&self) -> bool {
        matches!(self, ModelConfig::Lstm { .. } | ModelConfig::Qlstm { .. })
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, ModelConfig::Vqr { .. } | ModelConfig::Qlstm { .. })
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self {
            ModelConfig::Ffnn { hidden, .. } if hidden.contains(&0) => bad("ffnn hidden sizes must be positive".into()),
            ModelConfig::Lstm { hidden, layers } if *hidden == 0 || *layers == 0 => {
                bad("lstm needs positive hidden size and layer count".into())
            }
            ModelConfig::Vqr { qubits, .. } if *qubits != n_features => bad(format!(
                "vqr embeds one feature per qubit: {n_features} features but {qubits} qubits"
            )),
            ModelConfig::Qlstm { hidden, .. } if *hidden == 0 => bad("qlstm hidden size must be positive".into()),
            _ => Ok(()),
        }
    }

    /// Network with freshly drawn parameters.
    pub fn init<R: Rng + ?Sized>(&self, n_features: usize, rng: &mut R) -> Result<Network> {
        self.validate(n_features)?;
        Ok(match self {
            ModelConfig::Ffnn { hidden, activation } => Network::Ffnn(Ffnn::new(n_features, hidden, *activation, rng)),
            ModelConfig::Lstm { hidden, layers } => Network::Lstm(Lstm::new(n_features, *hidden, *layers, rng)),
            ModelConfig::Vqr { .. } => {
                let template = self.vqr_template()?;
                let params = ParamVector::random(template.total_params(), rng);
                Network::Vqr(Vqr { template, params })
            }
            ModelConfig::Qlstm {
                qubits,
                layers,
                hidden,
                per_gate_fc_out,
            } => Network::Qlstm(Qlstm::new(n_features, *hidden, *qubits, *layers, *per_gate_fc_out, rng)?),
        })
    }

    /// Network of the right shape with every parameter zero.
    pub fn zeros(&self, n_features: usize) -> Result<Network> {
        self.validate(n_features)?;
        let mut net = self.init(n_features, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0))?;
        let n = net.n_params();
        net.set_params(&vec![0.0; n])?;
        Ok(net)
    }

    fn vqr_template(&self) -> Result<CircuitTemplate> {
        match *self {
            ModelConfig::Vqr {
                qubits,
                layers,
                architecture,
                axis,
                transform,
            } => match architecture {
                VqrArchitecture::Linear => CircuitTemplate::linear(qubits, layers, axis, transform),
                VqrArchitecture::NonLinear => CircuitTemplate::non_linear(qubits, layers, axis, transform),
            },
            _ => Err(Error::Config("not a vqr configuration".into())),
        }
    }
}

/// Variational quantum regressor: the prediction is `⟨Z₀⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vqr {
    pub template: CircuitTemplate,
    pub params: ParamVector,
}

impl Vqr {
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        Ok(evaluate(&self.template, &self.params, features)?[0])
    }

    fn readout_weights(&self, d_out: f64) -> Vec<f64> {
        let mut w = vec![0.0; self.template.n_qubits];
        w[0] = d_out;
        w
    }

    /// `∂L/∂θ` given `∂L/∂⟨Z₀⟩`.
    pub fn backward(&self, features: &[f64], d_out: f64) -> Result<Vec<f64>> {
        if d_out == 0.0 {
            return Ok(vec![0.0; self.params.len()]);
        }
        Ok(shift_grad(&self.template, &self.params, features, &self.readout_weights(d_out), false)?.params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "network", rename_all = "snake_case")]
pub enum Network {
    Ffnn(Ffnn),
    Lstm(Lstm),
    Vqr(Vqr),
    Qlstm(Qlstm),
}

impl Network {
    pub fn n_params(&self) -> usize {
        match self {
            Network::Ffnn(m) => m.n_params(),
            Network::Lstm(m) => m.n_params(),
            Network::Vqr(m) => m.params.len(),
            Network::Qlstm(m) => m.n_params(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        match self {
            Network::Ffnn(m) => m.flatten_into(&mut out),
            Network::Lstm(m) => m.flatten_into(&mut out),
            Network::Vqr(m) => out.extend_from_slice(&m.params),
            Network::Qlstm(m) => m.flatten_into(&mut out),
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let n = self.n_params();
        if values.len() != n {
            return Err(Error::Shape(format!("network has {n} parameters, got {}", values.len())));
        }
        match self {
            Network::Ffnn(m) => {
                m.load_from(values)?;
            }
            Network::Lstm(m) => {
                m.load_from(values)?;
            }
            Network::Vqr(m) => m.params.0.copy_from_slice(values),
            Network::Qlstm(m) => {
                m.load_from(values)?;
            }
        }
        Ok(())
    }

    pub fn param_groups(&self) -> Vec<ParamGroup> {
        match self {
            Network::Ffnn(m) => m.param_groups(),
            Network::Lstm(m) => m.param_groups(),
            Network::Vqr(m) => vec![ParamGroup::quantum("vqc", vec![m.params.len()])],
            Network::Qlstm(m) => m.param_groups(),
        }
    }

    /// Prediction from one scaled window. Feed-forward models read only its
    /// last row.
    pub fn forward(&self, window: &[Vec<f64>]) -> Result<f64> {
        let last = || window.last().ok_or_else(|| Error::Shape("empty window".into()));
        match self {
            Network::Ffnn(m) => Ok(m.forward(last()?)?.0),
            Network::Lstm(m) => Ok(m.sequence_forward(window)?.0),
            Network::Vqr(m) => m.predict(last()?),
            Network::Qlstm(m) => Ok(m.sequence_forward(window)?.0),
        }
    }

    /// Prediction and `∂L/∂params`, where `d_loss(prediction)` is `∂L/∂prediction`.
    pub fn forward_backward(&self, window: &[Vec<f64>], d_loss: impl Fn(f64) -> f64) -> Result<(f64, Vec<f64>)> {
        let last = || window.last().ok_or_else(|| Error::Shape("empty window".into()));
        let mut grad = vec![0.0; self.n_params()];
        let y = match self {
            Network::Ffnn(m) => {
                let (y, caches) = m.forward(last()?)?;
                m.backward(&caches, d_loss(y), &mut grad);
                y
            }
            Network::Lstm(m) => {
                let (y, cache) = m.sequence_forward(window)?;
                m.sequence_backward(&cache, d_loss(y), &mut grad);
                y
            }
            Network::Vqr(m) => {
                let x = last()?;
                let y = m.predict(x)?;
                grad = m.backward(x, d_loss(y))?;
                y
            }
            Network::Qlstm(m) => {
                let (y, steps) = m.sequence_forward(window)?;
                m.sequence_backward(&steps, d_loss(y), &mut grad)?;
                y
            }
        };
        Ok((y, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub total: usize,
    pub classical: usize,
    pub quantum: usize,
    pub groups: Vec<ParamGroup>,
}

pub fn count_trainable_params(network: &Network) -> ParamCount {
    let groups = network.param_groups();
    let quantum = groups.iter().filter(|g| g.quantum).map(ParamGroup::len).sum();
    let total = network.n_params();
    ParamCount {
        total,
        classical: total - quantum,
        quantum,
        groups,
    }
}
