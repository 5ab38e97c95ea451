use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{count_trainable_params, ModelConfig, Network, ParamCount};
use crate::data::{make_windows, CalibrationDataset, FeatureSet, RangeScaler};
use crate::error::{Error, Result};
use crate::neural::{loss, loss_grad, rmse, LossKind, Optimizer, OptimizerKind, ParamCheckpoint};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub batch_size: usize,
    /// Window length `T`. Feed-forward models always use 1.
    #[serde(default = "one")]
    pub window: usize,
    #[serde(default)]
    pub seed: u64,
    /// Reshuffle sample order every epoch.
    #[serde(default = "yes")]
    pub shuffle: bool,
    /// Overrides the model's default feature set.
    #[serde(default)]
    pub features: Option<FeatureSet>,
    #[serde(default = "yes")]
    pub scale_inputs: bool,
    /// Quantum models require this.
    #[serde(default = "yes")]
    pub scale_target: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl TrainConfig {
    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if self.batch_size == 0 || self.window == 0 {
            return Err(Error::Config("batch size and window must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if model.is_quantum() && !self.scale_target {
            return Err(Error::Config(format!(
                "{} outputs are bounded in [-1, 1] and need target scaling",
                model.name()
            )));
        }
        Ok(())
    }

    pub fn effective_window(&self, model: &ModelConfig) -> usize {
        if model.is_sequence() {
            self.window
        } else {
            1
        }
    }
}

/// Scaled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub timestamp: i64,
    pub raw_pm25: f64,
    pub calibrated_pm25: f64,
    pub reference_pm25: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub l1: f64,
    pub mse: f64,
    pub rmse: f64,
}

impl Metrics {
    pub fn from_pairs(predictions: &[f64], targets: &[f64]) -> Result<Self> {
        Ok(Self {
            n: predictions.len(),
            l1: loss(LossKind::L1, predictions, targets)?,
            mse: loss(LossKind::Mse, predictions, targets)?,
            rmse: rmse(predictions, targets)?,
        })
    }

    pub fn get(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::L1 => self.l1,
            LossKind::Mse => self.mse,
        }
    }
}

/// Per-epoch mean training loss in target units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_loss: Vec<f64>,
}

/// A network together with its feature selection and scalers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub model: ModelConfig,
    pub window: usize,
    pub features: FeatureSet,
    pub input_scaler: Option<RangeScaler>,
    pub target_scaler: Option<RangeScaler>,
    pub network: Network,
}

impl Calibrator {
    /// Fits scalers on `train` and draws initial parameters from `config.seed`.
    pub fn init(model: &ModelConfig, train: &CalibrationDataset, config: &TrainConfig) -> Result<Self> {
        config.validate(model)?;
        let features = config.features.unwrap_or_else(|| model.default_features());
        if train.is_empty() {
            return Err(Error::Data("training partition is empty".into()));
        }
        let input_scaler = if config.scale_inputs {
            Some(RangeScaler::fit(&features.names(), &train.features(features))?)
        } else {
            None
        };
        let target_scaler = if config.scale_target {
            Some(RangeScaler::fit_column("ref_pm25", &train.targets())?)
        } else {
            None
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let network = model.init(features.len(), &mut rng)?;
        Ok(Self {
            model: model.clone(),
            window: config.effective_window(model),
            features,
            input_scaler,
            target_scaler,
            network,
        })
    }

    pub fn param_count(&self) -> ParamCount {
        count_trainable_params(&self.network)
    }

    fn scale_inputs(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match &self.input_scaler {
            Some(s) => inputs.iter().map(|x| s.apply(x)).collect(),
            None => Ok(inputs.to_vec()),
        }
    }

    fn scale_target(&self, y: f64) -> f64 {
        self.target_scaler.as_ref().map_or(y, |s| s.scale(0, y))
    }

    pub fn unscale_target(&self, y: f64) -> f64 {
        self.target_scaler.as_ref().map_or(y, |s| s.unscale(0, y))
    }

    /// Calibrated PM2.5 from one window of unscaled feature rows.
    pub fn predict_window(&self, inputs: &[Vec<f64>]) -> Result<f64> {
        let scaled = self.scale_inputs(inputs)?;
        Ok(self.unscale_target(self.network.forward(&scaled)?))
    }

    pub fn samples(&self, ds: &CalibrationDataset) -> Result<Vec<Sample>> {
        make_windows(ds, self.window, self.features)?
            .into_iter()
            .map(|w| {
                Ok(Sample {
                    inputs: self.scale_inputs(&w.inputs)?,
                    target: self.scale_target(w.target),
                })
            })
            .collect()
    }

    /// One prediction per window end in `ds`.
    pub fn predict(&self, ds: &CalibrationDataset) -> Result<Vec<Prediction>> {
        let windows = make_windows(ds, self.window, self.features)?;
        let out: Vec<Result<Prediction>> = par::map_slice(&windows, |w| {
            Ok(Prediction {
                timestamp: w.end(),
                raw_pm25: w.raw_pm25,
                calibrated_pm25: self.predict_window(&w.inputs)?,
                reference_pm25: w.target,
            })
        });
        out.into_iter().collect()
    }

    pub fn checkpoint(&self) -> Result<ModelCheckpoint> {
        Ok(ModelCheckpoint {
            schema_version: ModelCheckpoint::SCHEMA_VERSION,
            model: self.model.clone(),
            window: self.window,
            features: self.features,
            input_scaler: self.input_scaler.clone(),
            target_scaler: self.target_scaler.clone(),
            params: ParamCheckpoint::new(self.network.param_groups(), self.network.params())?,
        })
    }
}

/// Test-set metrics and the predictions behind them.
pub fn evaluate_model(cal: &Calibrator, ds: &CalibrationDataset) -> Result<(Metrics, Vec<Prediction>)> {
    let preds = cal.predict(ds)?;
    if preds.is_empty() {
        return Err(Error::Data(format!("no length-{} windows in the evaluation partition", cal.window)));
    }
    let p: Vec<f64> = preds.iter().map(|r| r.calibrated_pm25).collect();
    let t: Vec<f64> = preds.iter().map(|r| r.reference_pm25).collect();
    Ok((Metrics::from_pairs(&p, &t)?, preds))
}

/// Predictions and the gradient of the mean batch loss.
pub fn batch_gradient(network: &Network, batch: &[&Sample], kind: LossKind) -> Result<(Vec<f64>, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let per_sample: Vec<Result<(f64, Vec<f64>)>> = par::map_slice(batch, |s| {
        network.forward_backward(&s.inputs, |p| loss_grad(kind, p, s.target))
    });
    let mut grad = vec![0.0; network.n_params()];
    let mut preds = Vec::with_capacity(batch.len());
    for r in per_sample {
        let (p, g) = r?;
        preds.push(p);
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((preds, grad))
}

/// Mini-batch training on `ds`. Sample order is reshuffled every epoch from
/// `config.seed`.
pub fn train(mut cal: Calibrator, ds: &CalibrationDataset, config: &TrainConfig) -> Result<(Calibrator, TrainHistory)> {
    config.validate(&cal.model)?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((cal, history));
    }
    let samples = cal.samples(ds)?;
    if samples.is_empty() {
        return Err(Error::Data(format!("no length-{} windows in the training partition", cal.window)));
    }
    let targets: Vec<f64> = samples.iter().map(|s| cal.unscale_target(s.target)).collect();
    let mut params = cal.network.params();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, params.len());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut preds = Vec::with_capacity(samples.len());
        let mut seen = Vec::with_capacity(samples.len());
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (p, g) = batch_gradient(&cal.network, &batch, config.loss)?;
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite gradient".into(),
                });
            }
            preds.extend(p.into_iter().map(|v| cal.unscale_target(v)));
            seen.extend_from_slice(chunk);
            opt.step(&mut params, &g)?;
            if !params.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite parameter".into(),
                });
            }
            cal.network.set_params(&params)?;
        }
        let t: Vec<f64> = seen.iter().map(|&i| targets[i]).collect();
        let epoch_loss = loss(config.loss, &preds, &t)?;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("training loss {epoch_loss}"),
            });
        }
        log::debug!("epoch {epoch}: train {:?} {epoch_loss:.4}", config.loss);
        history.epoch_loss.push(epoch_loss);
    }
    Ok((cal, history))
}

/// Everything needed to rebuild a trained [`Calibrator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub window: usize,
    pub features: FeatureSet,
    pub input_scaler: Option<RangeScaler>,
    pub target_scaler: Option<RangeScaler>,
    pub params: ParamCheckpoint,
}

impl ModelCheckpoint {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s)?;
        if ck.schema_version != Self::SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "checkpoint schema {} is not supported (expected {})",
                ck.schema_version,
                Self::SCHEMA_VERSION
            )));
        }
        Ok(ck)
    }

    pub fn into_calibrator(self) -> Result<Calibrator> {
        let mut network = self.model.zeros(self.features.len())?;
        if network.param_groups() != self.params.manifest {
            return Err(Error::Config("checkpoint manifest does not match the model configuration".into()));
        }
        network.set_params(&self.params.values)?;
        Ok(Calibrator {
            model: self.model,
            window: self.window,
            features: self.features,
            input_scaler: self.input_scaler,
            target_scaler: self.target_scaler,
            network,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::HourRow;
    use crate::neural::Activation;

    fn linear_ds(n: usize) -> CalibrationDataset {
        CalibrationDataset::new(
            (0..n)
                .map(|h| {
                    let x = 10.0 + 20.0 * ((h as f64) * 0.37).sin().abs();
                    HourRow {
                        timestamp: h as i64 * 3600,
                        pm25: x,
                        temperature: 10.0 + (h % 7) as f64,
                        humidity: 50.0 + (h % 11) as f64,
                        pressure: 1000.0 + (h % 5) as f64,
                        reference: 0.5 * x + 2.0,
                    }
                })
                .collect(),
        )
        .unwrap()
    }

    fn ffnn() -> ModelConfig {
        ModelConfig::Ffnn {
            hidden: vec![8],
            activation: Activation::Tanh,
        }
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            learning_rate: 0.01,
            optimizer: OptimizerKind::Adam,
            loss: LossKind::L1,
            batch_size: 10,
            window: 1,
            seed: 4,
            shuffle: true,
            features: None,
            scale_inputs: true,
            scale_target: true,
        }
    }

    #[test]
    fn zero_epochs_is_identity() {
        let ds = linear_ds(50);
        let cal = Calibrator::init(&ffnn(), &ds, &cfg(0)).unwrap();
        let (trained, hist) = train(cal.clone(), &ds, &cfg(0)).unwrap();
        assert_eq!(trained, cal);
        assert!(hist.epoch_loss.is_empty());
    }

    #[test]
    fn descends_and_is_deterministic() {
        let ds = linear_ds(120);
        let run = || {
            let cal = Calibrator::init(&ffnn(), &ds, &cfg(200)).unwrap();
            train(cal, &ds, &cfg(200)).unwrap()
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(ha.epoch_loss.len(), 200);
        assert!(ha.epoch_loss[199] < ha.epoch_loss[0]);
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_round_trip() {
        let ds = linear_ds(60);
        let cal = Calibrator::init(&ffnn(), &ds, &cfg(3)).unwrap();
        let (cal, _) = train(cal, &ds, &cfg(3)).unwrap();
        let json = cal.checkpoint().unwrap().to_json().unwrap();
        let back = ModelCheckpoint::from_json(&json).unwrap().into_calibrator().unwrap();
        assert_eq!(back, cal);
    }

    #[test]
    fn quantum_models_need_target_scaling() {
        let vqr = ModelConfig::Vqr {
            qubits: 4,
            layers: 1,
            architecture: super::super::VqrArchitecture::Linear,
            axis: crate::vqc::Axis::X,
            transform: crate::vqc::Transform::Arctan,
        };
        let mut c = cfg(1);
        c.scale_target = false;
        assert!(matches!(Calibrator::init(&vqr, &linear_ds(20), &c), Err(Error::Config(_))));
    }

    #[test]
    fn vqr_zero_params_predict_upper_bound() {
        let vqr = ModelConfig::Vqr {
            qubits: 4,
            layers: 2,
            architecture: super::super::VqrArchitecture::Linear,
            axis: crate::vqc::Axis::X,
            transform: crate::vqc::Transform::Arctan,
        };
        let ds = linear_ds(40);
        let mut cal = Calibrator::init(&vqr, &ds, &cfg(1)).unwrap();
        cal.network = vqr.zeros(4).unwrap();
        let s = cal.input_scaler.clone().unwrap();
        let mid: Vec<f64> = (0..4).map(|k| s.unscale(k, 0.0)).collect();
        let max = cal.target_scaler.as_ref().unwrap().max[0];
        assert!((cal.predict_window(&[mid]).unwrap() - max).abs() < 1e-9);
    }
}
