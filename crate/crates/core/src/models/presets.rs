//! Tuned configurations and a laptop-scale QLSTM.

use serde::{Deserialize, Serialize};

use super::{ModelConfig, TrainConfig, VqrArchitecture};
use crate::neural::{Activation, LossKind, OptimizerKind};
use crate::vqc::{Axis, Transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Ffnn,
    Vqr,
    Lstm,
    Qlstm,
    /// 3 qubits, 2 circuit layers, hidden 15, fewer epochs.
    QlstmDesk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_fraction: f64,
    /// Cross-validation fold count.
    pub folds: usize,
}

fn train_config(epochs: usize, lr: f64, optimizer: OptimizerKind, loss: LossKind, window: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: lr,
        optimizer,
        loss,
        batch_size: 10,
        window,
        seed: 0,
        shuffle: true,
        features: None,
        scale_inputs: true,
        scale_target: true,
    }
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [
        PresetName::Ffnn,
        PresetName::Vqr,
        PresetName::Lstm,
        PresetName::Qlstm,
        PresetName::QlstmDesk,
    ];

    pub fn preset(self) -> Preset {
        match self {
            PresetName::Ffnn => Preset {
                model: ModelConfig::Ffnn {
                    hidden: vec![30, 15, 5],
                    activation: Activation::Tanh,
                },
                train: train_config(200, 1e-4, OptimizerKind::Sgd, LossKind::L1, 1),
                train_fraction: 0.75,
                folds: 4,
            },
            PresetName::Vqr => Preset {
                model: ModelConfig::Vqr {
                    qubits: 4,
                    layers: 4,
                    architecture: VqrArchitecture::Linear,
                    axis: Axis::X,
                    transform: Transform::Arctan,
                },
                train: train_config(200, 0.01, OptimizerKind::Adam, LossKind::Mse, 1),
                train_fraction: 0.75,
                folds: 4,
            },
            PresetName::Lstm => Preset {
                model: ModelConfig::Lstm { hidden: 15, layers: 2 },
                train: train_config(300, 1e-3, OptimizerKind::RmsProp, LossKind::L1, 3),
                train_fraction: 0.70,
                folds: 5,
            },
            PresetName::Qlstm => Preset {
                model: ModelConfig::Qlstm {
                    qubits: 5,
                    layers: 7,
                    hidden: 15,
                    per_gate_fc_out: false,
                },
                train: train_config(400, 0.01, OptimizerKind::Adam, LossKind::L1, 5),
                train_fraction: 0.70,
                folds: 5,
            },
            PresetName::QlstmDesk => Preset {
                model: ModelConfig::Qlstm {
                    qubits: 3,
                    layers: 2,
                    hidden: 15,
                    per_gate_fc_out: false,
                },
                train: train_config(30, 0.01, OptimizerKind::Adam, LossKind::L1, 5),
                train_fraction: 0.70,
                folds: 5,
            },
        }
    }
}
