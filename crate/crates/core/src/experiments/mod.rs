//! Evaluation protocols: k-fold cross-validation, hold-out training, grid
//! search and the uncalibrated benchmark.

mod grid;
mod protocol;
mod report;

pub use grid::{grid_search, GridEntry, GridSearchResult, HyperparamGrid};
pub use protocol::{cross_validate, holdout, FoldResult};
pub use report::{emit_report, read_report, write_predictions, MetricsReport, Protocol, REPORT_SCHEMA_VERSION};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::CalibrationDataset;
use crate::error::{Error, Result};
use crate::neural::{loss, rmse, LossKind};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    Mse,
    Rmse,
}

impl Metric {
    pub fn compute(self, predictions: &[f64], targets: &[f64]) -> Result<f64> {
        match self {
            Metric::L1 => loss(LossKind::L1, predictions, targets),
            Metric::Mse => loss(LossKind::Mse, predictions, targets),
            Metric::Rmse => rmse(predictions, targets),
        }
    }

    pub fn of(self, m: &crate::models::Metrics) -> f64 {
        match self {
            Metric::L1 => m.l1,
            Metric::Mse => m.mse,
            Metric::Rmse => m.rmse,
        }
    }
}

impl From<LossKind> for Metric {
    fn from(k: LossKind) -> Self {
        match k {
            LossKind::L1 => Metric::L1,
            LossKind::Mse => Metric::Mse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldMode {
    Shuffled,
    /// Consecutive time blocks in chronological order.
    Contiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub mode: FoldMode,
    /// Used by `Shuffled` only.
    #[serde(default)]
    pub seed: u64,
}

/// Splits `0..n` into `k` disjoint index sets covering every index. Fold
/// sizes differ by at most one, with earlier folds taking the extra element.
/// Each set is returned in ascending order.
pub fn make_folds(n: usize, spec: &FoldSpec) -> Result<Vec<Vec<usize>>> {
    if spec.k == 0 || spec.k > n {
        return Err(Error::Config(format!("cannot split {n} rows into {} folds", spec.k)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if spec.mode == FoldMode::Shuffled {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    }
    let (base, extra) = (n / spec.k, n % spec.k);
    let mut folds = Vec::with_capacity(spec.k);
    let mut start = 0;
    for i in 0..spec.k {
        let len = base + usize::from(i < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("summary of an empty sample".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Ok(Self {
            mean,
            std: var.sqrt(),
            min: v[0],
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: v[v.len() - 1],
        })
    }
}

pub const DEFAULT_DRAWS: usize = 1000;

/// Loss of the raw fused PM2.5 against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkDistribution {
    pub metric: Metric,
    pub sample_size: usize,
    pub n_draws: usize,
    pub seed: u64,
    /// Over every row of the dataset.
    pub whole_set: f64,
    pub summary: Summary,
    #[serde(skip)]
    pub draws: Vec<f64>,
}

/// `n_draws` seeded random subsets of `sample_size` rows. Draw `d` uses the
/// ChaCha stream `d`, so the result does not depend on scheduling.
pub fn benchmark_uncalibrated(
    ds: &CalibrationDataset,
    metric: Metric,
    sample_size: usize,
    n_draws: usize,
    seed: u64,
) -> Result<BenchmarkDistribution> {
    let n = ds.len();
    if sample_size == 0 || sample_size > n {
        return Err(Error::Config(format!("benchmark sample size {sample_size} must lie in 1..={n}")));
    }
    if n_draws == 0 {
        return Err(Error::Config("benchmark needs at least one draw".into()));
    }
    let raw = ds.raw_pm25();
    let reference = ds.targets();
    let whole_set = metric.compute(&raw, &reference)?;
    let draws: Vec<Result<f64>> = par::map_range(n_draws, |d| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(d as u64);
        let idx = rand::seq::index::sample(&mut rng, n, sample_size);
        let p: Vec<f64> = idx.iter().map(|i| raw[i]).collect();
        let t: Vec<f64> = idx.iter().map(|i| reference[i]).collect();
        metric.compute(&p, &t)
    });
    let draws = draws.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(BenchmarkDistribution {
        metric,
        sample_size,
        n_draws,
        seed,
        whole_set,
        summary: Summary::of(&draws)?,
        draws,
    })
}
