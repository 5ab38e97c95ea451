use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchmarkDistribution, FoldResult, FoldSpec};
use crate::data::format_timestamp;
use crate::error::{Error, Result};
use crate::models::{Metrics, ModelConfig, ParamCount, Prediction, TrainConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum Protocol {
    Holdout { train_fraction: f64 },
    CrossValidation { folds: FoldSpec },
}

/// Per-fold and averaged losses for one model configuration. Contains no
/// timing so identical inputs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub protocol: Protocol,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub average: Option<Metrics>,
    pub benchmark: Option<BenchmarkDistribution>,
    pub params: ParamCount,
    /// Written to the CSV, not to the JSON.
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn write_predictions<W: std::io::Write>(preds: &[Prediction], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "raw_pm25", "calibrated_pm25", "reference_pm25"])?;
    for p in preds {
        w.write_record([
            format_timestamp(p.timestamp),
            p.raw_pm25.to_string(),
            p.calibrated_pm25.to_string(),
            p.reference_pm25.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json` and `predictions.csv` into `dir`, returning both paths.
pub fn emit_report(report: &MetricsReport, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.folds.is_empty() {
        return Err(Error::Data("refusing to write an empty report".into()));
    }
    let json = report.to_json()?;
    fs::create_dir_all(dir)?;
    let json_path = dir.join("report.json");
    let csv_path = dir.join("predictions.csv");
    fs::write(&json_path, json)?;
    write_predictions(&report.predictions, fs::File::create(&csv_path)?)?;
    Ok(vec![json_path, csv_path])
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let report: MetricsReport = serde_json::from_str(&fs::read_to_string(path)?)?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "report schema {} is not supported (expected {REPORT_SCHEMA_VERSION})",
            report.schema_version
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_dataset, synthesize, SynthProfile};
    use crate::experiments::holdout;
    use crate::models::PresetName;

    fn report() -> MetricsReport {
        let c = synthesize(2, 96, &SynthProfile::default()).unwrap();
        let (ds, _) = build_dataset(&c.low_cost, &c.reference).unwrap();
        let mut p = PresetName::Ffnn.preset();
        p.train.epochs = 3;
        holdout(&p.model, &p.train, &ds, 0.75, 25).unwrap().1
    }

    #[test]
    fn round_trip_and_csv_rows() {
        let r = report();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&r, dir.path()).unwrap();
        let back = read_report(&paths[0]).unwrap();
        let mut expected = r.clone();
        expected.predictions.clear();
        if let Some(b) = expected.benchmark.as_mut() {
            b.draws.clear();
        }
        assert_eq!(back, expected);
        let csv = fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(csv.lines().count(), 1 + r.folds[0].n_test);
        assert!(csv.starts_with("timestamp,raw_pm25,calibrated_pm25,reference_pm25\n"));
    }

    #[test]
    fn empty_report_writes_nothing() {
        let r = MetricsReport {
            folds: Vec::new(),
            ..report()
        };
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(emit_report(&r, &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn byte_identical_reruns() {
        assert_eq!(report().to_json().unwrap(), report().to_json().unwrap());
    }
}
