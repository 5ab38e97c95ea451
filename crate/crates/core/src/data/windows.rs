use serde::{Deserialize, Serialize};

use super::{CalibrationDataset, FeatureSet, HOUR};
use crate::error::{Error, Result};

/// `T` consecutive hours of features and the reference value of the last hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub timestamps: Vec<i64>,
    pub inputs: Vec<Vec<f64>>,
    pub target: f64,
    /// Fused low-cost PM2.5 of the last hour.
    pub raw_pm25: f64,
}

impl Window {
    pub fn end(&self) -> i64 {
        *self.timestamps.last().expect("windows are non-empty")
    }
}

/// All length-`t` windows over runs of contiguous hours. No window crosses a gap.
pub fn make_windows(ds: &CalibrationDataset, t: usize, features: FeatureSet) -> Result<Vec<Window>> {
    if t == 0 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    let mut out = Vec::new();
    let mut run_start = 0;
    for end in 0..ds.rows.len() {
        if end > 0 && ds.rows[end].timestamp - ds.rows[end - 1].timestamp != HOUR {
            run_start = end;
        }
        if end + 1 - run_start >= t {
            let rows = &ds.rows[end + 1 - t..=end];
            out.push(Window {
                timestamps: rows.iter().map(|r| r.timestamp).collect(),
                inputs: rows.iter().map(|r| features.extract(r)).collect(),
                target: rows[t - 1].reference,
                raw_pm25: rows[t - 1].pm25,
            });
        }
    }
    if out.is_empty() && !ds.is_empty() {
        log::warn!("window length {t} exceeds every contiguous run; no windows produced");
    }
    Ok(out)
}

/// First `⌈fraction·n⌉` rows train, the rest test.
pub fn chronological_split(
    ds: &CalibrationDataset,
    train_fraction: f64,
) -> Result<(CalibrationDataset, CalibrationDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let n = ds.len();
    // tolerance keeps 0.7·100 at 70 instead of 71
    let cut = ((train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let cut = cut.min(n);
    Ok((
        CalibrationDataset {
            rows: ds.rows[..cut].to_vec(),
        },
        CalibrationDataset {
            rows: ds.rows[cut..].to_vec(),
        },
    ))
}
