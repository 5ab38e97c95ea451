//! Measurement ingestion and preprocessing into an hourly calibration dataset.

mod aggregate;
mod align;
mod ingest;
mod scaler;
mod synth;
mod windows;

pub use aggregate::{aggregate, fuse_quantity, fuse_quantities, median_fuse, FusedFeatures, Granularity, SeriesSet};
pub use align::{align_and_clean, CleanReport};
pub use ingest::{
    format_timestamp, ingest, ingest_reference, parse_timestamp, read_dataset, write_dataset, write_low_cost,
    write_reference, Ingested, NaiveTime,
};
pub use scaler::RangeScaler;
pub use synth::{synthesize, SynthProfile, SyntheticCampaign};
pub use windows::{chronological_split, make_windows, Window};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOUR: i64 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Pm25,
    Temperature,
    Humidity,
    Pressure,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::Pm25, Quantity::Temperature, Quantity::Humidity, Quantity::Pressure];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Pm25 => "pm25",
            Quantity::Temperature => "temperature",
            Quantity::Humidity => "humidity",
            Quantity::Pressure => "pressure",
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pm25" | "pm2.5" | "pm2_5" => Ok(Quantity::Pm25),
            "temperature" | "temp" => Ok(Quantity::Temperature),
            "humidity" | "hum" | "rh" => Ok(Quantity::Humidity),
            "pressure" | "press" => Ok(Quantity::Pressure),
            other => Err(Error::Data(format!("unknown quantity '{other}'"))),
        }
    }
}

/// One low-cost sensor reading. `timestamp` is UTC seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub timestamp: i64,
    pub sensor_id: String,
    pub quantity: Quantity,
    pub value: f64,
}

/// Hourly reference PM2.5 keyed by hour-start UTC seconds.
pub type ReferenceSeries = BTreeMap<i64, f64>;

/// One aligned hour: fused low-cost medians and the reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourRow {
    pub timestamp: i64,
    pub pm25: f64,
    pub temperature: f64,
    pub humidity: f64,
    pub pressure: f64,
    pub reference: f64,
}

/// Which fused columns a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// PM2.5, temperature, humidity, pressure.
    All,
    PmOnly,
}

impl FeatureSet {
    pub fn len(self) -> usize {
        match self {
            FeatureSet::All => 4,
            FeatureSet::PmOnly => 1,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn names(self) -> Vec<String> {
        let all = ["pm25", "temp", "hum", "press"];
        all[..self.len()].iter().map(|s| s.to_string()).collect()
    }

    pub fn extract(self, row: &HourRow) -> Vec<f64> {
        match self {
            FeatureSet::All => vec![row.pm25, row.temperature, row.humidity, row.pressure],
            FeatureSet::PmOnly => vec![row.pm25],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDataset {
    pub rows: Vec<HourRow>,
}

impl CalibrationDataset {
    pub fn new(rows: Vec<HourRow>) -> Result<Self> {
        let ds = Self { rows };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, r) in self.rows.iter().enumerate() {
            if r.timestamp.rem_euclid(HOUR) != 0 {
                return Err(Error::Data(format!("row {k}: timestamp {} not on the hour", r.timestamp)));
            }
            let vals = [r.pm25, r.temperature, r.humidity, r.pressure, r.reference];
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::Data(format!("row {k}: non-finite value")));
            }
        }
        if let Some(w) = self.rows.windows(2).find(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::Data(format!(
                "timestamps not strictly increasing at {}",
                format_timestamp(w[1].timestamp)
            )));
        }
        Ok(())
    }

    /// Rows at the given indices, kept in time order.
    pub fn subset(&self, indices: &[usize]) -> CalibrationDataset {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        CalibrationDataset {
            rows: idx.into_iter().map(|i| self.rows[i]).collect(),
        }
    }

    pub fn features(&self, set: FeatureSet) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| set.extract(r)).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reference).collect()
    }

    pub fn raw_pm25(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.pm25).collect()
    }
}

/// Full preprocessing: hourly aggregation, median fusion, alignment.
pub fn build_dataset(samples: &[RawSample], reference: &ReferenceSeries) -> Result<(CalibrationDataset, CleanReport)> {
    let series = aggregate(samples, Granularity::Hour);
    let fused = fuse_quantities(&series);
    align_and_clean(&fused, reference)
}
