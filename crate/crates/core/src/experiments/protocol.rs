use serde::{Deserialize, Serialize};

use super::report::{MetricsReport, Protocol, REPORT_SCHEMA_VERSION};
use super::{benchmark_uncalibrated, make_folds, BenchmarkDistribution, FoldMode, FoldSpec, Metric};
use crate::data::{chronological_split, CalibrationDataset};
use crate::error::{Error, Result};
use crate::models::{
    count_trainable_params, evaluate_model, train, Calibrator, Metrics, ModelConfig, ParamCount, Prediction,
    TrainConfig,
};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Calibrated predictions against the reference.
    #[serde(default)]
    pub metrics: Option<Metrics>,
    /// Raw fused PM2.5 against the reference on the same rows.
    #[serde(default)]
    pub benchmark: Option<Metrics>,
    #[serde(default)]
    pub final_train_loss: Option<f64>,
    #[serde(default)]
    pub error: Option<String>,
}

struct FoldRun {
    result: FoldResult,
    predictions: Vec<Prediction>,
    calibrator: Option<Calibrator>,
}

fn run_split(
    fold: usize,
    model: &ModelConfig,
    config: &TrainConfig,
    train_ds: &CalibrationDataset,
    test_ds: &CalibrationDataset,
) -> FoldRun {
    let attempt = || -> Result<(Calibrator, f64, Metrics, Metrics, Vec<Prediction>)> {
        let cal = Calibrator::init(model, train_ds, config)?;
        let (cal, history) = train(cal, train_ds, config)?;
        let (metrics, preds) = evaluate_model(&cal, test_ds)?;
        let raw: Vec<f64> = preds.iter().map(|p| p.raw_pm25).collect();
        let reference: Vec<f64> = preds.iter().map(|p| p.reference_pm25).collect();
        let bench = Metrics::from_pairs(&raw, &reference)?;
        let last = history.epoch_loss.last().copied().unwrap_or(f64::NAN);
        Ok((cal, last, metrics, bench, preds))
    };
    let mut result = FoldResult {
        fold,
        seed: config.seed,
        n_train: train_ds.len(),
        n_test: test_ds.len(),
        metrics: None,
        benchmark: None,
        final_train_loss: None,
        error: None,
    };
    match attempt() {
        Ok((cal, last, metrics, bench, preds)) => {
            result.metrics = Some(metrics);
            result.benchmark = Some(bench);
            result.final_train_loss = last.is_finite().then_some(last);
            FoldRun {
                result,
                predictions: preds,
                calibrator: Some(cal),
            }
        }
        Err(e) => {
            log::warn!("fold {fold} failed: {e}");
            result.error = Some(e.to_string());
            FoldRun {
                result,
                predictions: Vec::new(),
                calibrator: None,
            }
        }
    }
}

/// Arithmetic mean of per-fold L1 and MSE; RMSE is √ of the mean MSE.
fn average(folds: &[FoldResult]) -> Option<Metrics> {
    let ok: Vec<&Metrics> = folds.iter().filter_map(|f| f.metrics.as_ref()).collect();
    if ok.is_empty() {
        return None;
    }
    let k = ok.len() as f64;
    let mse = ok.iter().map(|m| m.mse).sum::<f64>() / k;
    Some(Metrics {
        n: ok.iter().map(|m| m.n).sum(),
        l1: ok.iter().map(|m| m.l1).sum::<f64>() / k,
        mse,
        rmse: mse.sqrt(),
    })
}

fn param_count(model: &ModelConfig, config: &TrainConfig) -> Result<ParamCount> {
    let features = config.features.unwrap_or_else(|| model.default_features());
    Ok(count_trainable_params(&model.zeros(features.len())?))
}

/// Benchmark metric matching a training loss: L1 stays L1, MSE is reported as RMSE.
pub(crate) fn benchmark_metric(config: &TrainConfig) -> Metric {
    match config.loss {
        crate::neural::LossKind::L1 => Metric::L1,
        crate::neural::LossKind::Mse => Metric::Rmse,
    }
}

/// K train/test runs, fold `i` seeded with `config.seed + i`. Folds run in
/// parallel and failures are recorded per fold.
///
/// Sequence models need contiguous folds. Training windows never span the
/// join between non-adjacent training folds, because windows require
/// consecutive hours.
pub fn cross_validate(
    model: &ModelConfig,
    config: &TrainConfig,
    ds: &CalibrationDataset,
    spec: &FoldSpec,
    n_draws: usize,
) -> Result<MetricsReport> {
    if model.is_sequence() && spec.mode != FoldMode::Contiguous {
        return Err(Error::Config(format!(
            "{} trains on time windows and needs contiguous folds",
            model.name()
        )));
    }
    config.validate(model)?;
    let folds = make_folds(ds.len(), spec)?;
    let runs: Vec<FoldRun> = par::map_range(folds.len(), |i| {
        let test_set: std::collections::BTreeSet<usize> = folds[i].iter().copied().collect();
        let train_idx: Vec<usize> = (0..ds.len()).filter(|j| !test_set.contains(j)).collect();
        let cfg = TrainConfig {
            seed: config.seed.wrapping_add(i as u64),
            ..config.clone()
        };
        run_split(i, model, &cfg, &ds.subset(&train_idx), &ds.subset(&folds[i]))
    });
    let smallest = folds.iter().map(Vec::len).min().unwrap_or(0);
    let benchmark = benchmark_uncalibrated(ds, benchmark_metric(config), smallest, n_draws, config.seed)?;
    let mut predictions: Vec<Prediction> = runs.iter().flat_map(|r| r.predictions.iter().cloned()).collect();
    predictions.sort_by_key(|p| p.timestamp);
    let folds: Vec<FoldResult> = runs.into_iter().map(|r| r.result).collect();
    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        protocol: Protocol::CrossValidation { folds: *spec },
        model: model.clone(),
        train: config.clone(),
        seed: config.seed,
        average: average(&folds),
        folds,
        benchmark: Some(benchmark),
        params: param_count(model, config)?,
        predictions,
    })
}

/// Test metrics after training on a fixed chronological split.
pub(crate) fn split_metrics(
    model: &ModelConfig,
    config: &TrainConfig,
    ds: &CalibrationDataset,
    train_fraction: f64,
) -> Result<Metrics> {
    let (train_ds, test_ds) = chronological_split(ds, train_fraction)?;
    let cal = Calibrator::init(model, &train_ds, config)?;
    let (cal, _) = train(cal, &train_ds, config)?;
    Ok(evaluate_model(&cal, &test_ds)?.0)
}

/// Train on the first `train_fraction` of the hours, test on the rest.
/// The benchmark distribution draws half-size subsets of the test partition.
pub fn holdout(
    model: &ModelConfig,
    config: &TrainConfig,
    ds: &CalibrationDataset,
    train_fraction: f64,
    n_draws: usize,
) -> Result<(Calibrator, MetricsReport)> {
    config.validate(model)?;
    let (train_ds, test_ds) = chronological_split(ds, train_fraction)?;
    if test_ds.is_empty() {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} leaves no test rows out of {}",
            ds.len()
        )));
    }
    let run = run_split(0, model, config, &train_ds, &test_ds);
    let calibrator = match (run.calibrator, &run.result.error) {
        (Some(c), _) => c,
        (None, Some(e)) => return Err(Error::Data(format!("training failed: {e}"))),
        (None, None) => unreachable!("a run without a model records its error"),
    };
    let benchmark: BenchmarkDistribution = benchmark_uncalibrated(
        &test_ds,
        benchmark_metric(config),
        test_ds.len().div_ceil(2),
        n_draws,
        config.seed,
    )?;
    let folds = vec![run.result];
    let report = MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        protocol: Protocol::Holdout { train_fraction },
        model: model.clone(),
        train: config.clone(),
        seed: config.seed,
        average: average(&folds),
        folds,
        benchmark: Some(benchmark),
        params: count_trainable_params(&calibrator.network),
        predictions: run.predictions,
    };
    Ok((calibrator, report))
}
