use serde::{Deserialize, Serialize};

use super::protocol::{benchmark_metric, split_metrics};
use super::Metric;
use crate::data::CalibrationDataset;
use crate::error::{Error, Result};
use crate::models::{Metrics, ModelConfig, TrainConfig, VqrArchitecture};
use crate::neural::{LossKind, OptimizerKind};
use crate::par;

/// Candidate values per hyperparameter. An empty axis keeps the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparamGrid {
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub epochs: Vec<usize>,
    #[serde(default)]
    pub learning_rate: Vec<f64>,
    #[serde(default)]
    pub optimizer: Vec<OptimizerKind>,
    #[serde(default)]
    pub loss: Vec<LossKind>,
    #[serde(default)]
    pub batch_size: Vec<usize>,
    /// FFNN layer sizes, or the single hidden size of recurrent models.
    #[serde(default)]
    pub hidden: Vec<Vec<usize>>,
    #[serde(default)]
    pub window: Vec<usize>,
    #[serde(default)]
    pub qubits: Vec<usize>,
    /// Recurrent layers for LSTM, circuit layers for VQR and QLSTM.
    #[serde(default)]
    pub layers: Vec<usize>,
    #[serde(default)]
    pub architecture: Vec<VqrArchitecture>,
    /// Metric used for ranking. Defaults to the one matching the base loss.
    #[serde(default)]
    pub rank_by: Option<Metric>,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

impl HyperparamGrid {
    fn check_axes(&self) -> Result<()> {
        let unused = |name: &str| Err(Error::Config(format!("grid axis '{name}' does not apply to {}", self.model.name())));
        match &self.model {
            ModelConfig::Ffnn { .. } => {
                if !self.qubits.is_empty() {
                    return unused("qubits");
                }
                if !self.layers.is_empty() {
                    return unused("layers");
                }
                if !self.architecture.is_empty() {
                    return unused("architecture");
                }
            }
            ModelConfig::Lstm { .. } => {
                if !self.qubits.is_empty() {
                    return unused("qubits");
                }
                if !self.architecture.is_empty() {
                    return unused("architecture");
                }
            }
            ModelConfig::Vqr { .. } => {
                if !self.hidden.is_empty() {
                    return unused("hidden");
                }
            }
            ModelConfig::Qlstm { .. } => {
                if !self.architecture.is_empty() {
                    return unused("architecture");
                }
            }
        }
        if self.hidden.iter().any(Vec::is_empty) {
            return Err(Error::Config("grid hidden sizes must be non-empty lists".into()));
        }
        Ok(())
    }

    fn models(&self) -> Vec<ModelConfig> {
        let mut out = Vec::new();
        match &self.model {
            ModelConfig::Ffnn { hidden, activation } => {
                for h in axis(&self.hidden, hidden.clone()) {
                    out.push(ModelConfig::Ffnn {
                        hidden: h,
                        activation: *activation,
                    });
                }
            }
            ModelConfig::Lstm { hidden, layers } => {
                for h in axis(&self.hidden, vec![*hidden]) {
                    for l in axis(&self.layers, *layers) {
                        out.push(ModelConfig::Lstm { hidden: h[0], layers: l });
                    }
                }
            }
            ModelConfig::Vqr {
                qubits,
                layers,
                architecture,
                axis: ax,
                transform,
            } => {
                for q in axis(&self.qubits, *qubits) {
                    for l in axis(&self.layers, *layers) {
                        for a in axis(&self.architecture, *architecture) {
                            out.push(ModelConfig::Vqr {
                                qubits: q,
                                layers: l,
                                architecture: a,
                                axis: *ax,
                                transform: *transform,
                            });
                        }
                    }
                }
            }
            ModelConfig::Qlstm {
                qubits,
                layers,
                hidden,
                per_gate_fc_out,
            } => {
                for h in axis(&self.hidden, vec![*hidden]) {
                    for q in axis(&self.qubits, *qubits) {
                        for l in axis(&self.layers, *layers) {
                            out.push(ModelConfig::Qlstm {
                                qubits: q,
                                layers: l,
                                hidden: h[0],
                                per_gate_fc_out: *per_gate_fc_out,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn trains(&self) -> Vec<TrainConfig> {
        let b = &self.train;
        let mut out = Vec::new();
        for &epochs in &axis(&self.epochs, b.epochs) {
            for &learning_rate in &axis(&self.learning_rate, b.learning_rate) {
                for &optimizer in &axis(&self.optimizer, b.optimizer) {
                    for &loss in &axis(&self.loss, b.loss) {
                        for &batch_size in &axis(&self.batch_size, b.batch_size) {
                            for &window in &axis(&self.window, b.window) {
                                out.push(TrainConfig {
                                    epochs,
                                    learning_rate,
                                    optimizer,
                                    loss,
                                    batch_size,
                                    window,
                                    ..b.clone()
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Cartesian product in a fixed order.
    pub fn points(&self) -> Result<Vec<(ModelConfig, TrainConfig)>> {
        self.check_axes()?;
        let trains = self.trains();
        Ok(self
            .models()
            .into_iter()
            .flat_map(|m| trains.iter().map(move |t| (m.clone(), t.clone())))
            .collect())
    }

    pub fn size(&self) -> Result<usize> {
        self.check_axes()?;
        Ok(self.models().len() * self.trains().len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    /// 1-based; failed points are ranked last in grid order.
    pub rank: usize,
    pub index: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub metrics: Option<Metrics>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub size: usize,
    pub train_fraction: f64,
    pub rank_by: Metric,
    /// Sorted by rank.
    pub entries: Vec<GridEntry>,
}

impl GridSearchResult {
    pub fn best(&self) -> Option<&GridEntry> {
        self.entries.first().filter(|e| e.metrics.is_some())
    }
}

/// Trains every grid point on one fixed chronological split and ranks by
/// the chosen test metric.
pub fn grid_search(grid: &HyperparamGrid, ds: &CalibrationDataset, train_fraction: f64) -> Result<GridSearchResult> {
    let points = grid.points()?;
    let rank_by = grid.rank_by.unwrap_or_else(|| benchmark_metric(&grid.train));
    log::info!("grid search over {} configurations", points.len());
    let outcomes: Vec<Result<Metrics>> = par::map_slice(&points, |(m, t)| split_metrics(m, t, ds, train_fraction));
    let mut entries: Vec<GridEntry> = points
        .into_iter()
        .zip(outcomes)
        .enumerate()
        .map(|(index, ((model, train), r))| {
            let (metrics, error) = match r {
                Ok(m) => (Some(m), None),
                Err(e) => {
                    log::warn!("grid point {index} failed: {e}");
                    (None, Some(e.to_string()))
                }
            };
            GridEntry {
                rank: 0,
                index,
                model,
                train,
                metrics,
                error,
            }
        })
        .collect();
    let key = |e: &GridEntry| e.metrics.as_ref().map_or(f64::INFINITY, |m| rank_by.of(m));
    entries.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.index.cmp(&b.index)));
    for (r, e) in entries.iter_mut().enumerate() {
        e.rank = r + 1;
    }
    Ok(GridSearchResult {
        size: entries.len(),
        train_fraction,
        rank_by,
        entries,
    })
}
