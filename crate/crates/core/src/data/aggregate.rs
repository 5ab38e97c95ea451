use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Quantity, RawSample};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Minute,
    Hour,
}

impl Granularity {
    pub fn seconds(self) -> i64 {
        match self {
            Granularity::Minute => 60,
            Granularity::Hour => 3600,
        }
    }
}

/// Bucket-start timestamp → mean value, per (sensor, quantity).
pub type SeriesSet = BTreeMap<(String, Quantity), BTreeMap<i64, f64>>;

/// Arithmetic mean per (sensor, quantity, bucket). Empty buckets are absent.
pub fn aggregate(samples: &[RawSample], granularity: Granularity) -> SeriesSet {
    let width = granularity.seconds();
    let mut grouped: BTreeMap<(String, Quantity), Vec<(i64, f64)>> = BTreeMap::new();
    for s in samples {
        grouped
            .entry((s.sensor_id.clone(), s.quantity))
            .or_default()
            .push((s.timestamp.div_euclid(width) * width, s.value));
    }
    let groups: Vec<_> = grouped.into_iter().collect();
    let means = par::map_slice(&groups, |(_, values)| bucket_means(values));
    groups.into_iter().map(|(k, _)| k).zip(means).collect()
}

fn bucket_means(values: &[(i64, f64)]) -> BTreeMap<i64, f64> {
    let mut buckets: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &(b, v) in values {
        buckets.entry(b).or_default().push(v);
    }
    buckets.into_iter().map(|(b, vs)| (b, shifted_mean(&vs))).collect()
}

// Mean taken relative to the first value: exact for constant buckets.
fn shifted_mean(vs: &[f64]) -> f64 {
    let first = vs[0];
    first + vs.iter().map(|v| v - first).sum::<f64>() / vs.len() as f64
}

/// Per bucket, the median over the sensors reporting in that bucket.
pub fn median_fuse(series: &[&BTreeMap<i64, f64>]) -> BTreeMap<i64, f64> {
    let mut buckets: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for s in series {
        for (&b, &v) in s.iter() {
            buckets.entry(b).or_default().push(v);
        }
    }
    buckets.into_iter().map(|(b, mut vs)| (b, median(&mut vs))).collect()
}

fn median(vs: &mut [f64]) -> f64 {
    vs.sort_by(f64::total_cmp);
    let n = vs.len();
    if n % 2 == 1 {
        vs[n / 2]
    } else {
        0.5 * (vs[n / 2 - 1] + vs[n / 2])
    }
}

pub fn fuse_quantity(series: &SeriesSet, quantity: Quantity) -> BTreeMap<i64, f64> {
    let members: Vec<&BTreeMap<i64, f64>> = series
        .iter()
        .filter(|((_, q), _)| *q == quantity)
        .map(|(_, s)| s)
        .collect();
    median_fuse(&members)
}

/// Fused series of every quantity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FusedFeatures {
    pub pm25: BTreeMap<i64, f64>,
    pub temperature: BTreeMap<i64, f64>,
    pub humidity: BTreeMap<i64, f64>,
    pub pressure: BTreeMap<i64, f64>,
}

impl FusedFeatures {
    pub fn get(&self, q: Quantity) -> &BTreeMap<i64, f64> {
        match q {
            Quantity::Pm25 => &self.pm25,
            Quantity::Temperature => &self.temperature,
            Quantity::Humidity => &self.humidity,
            Quantity::Pressure => &self.pressure,
        }
    }
}

pub fn fuse_quantities(series: &SeriesSet) -> FusedFeatures {
    FusedFeatures {
        pm25: fuse_quantity(series, Quantity::Pm25),
        temperature: fuse_quantity(series, Quantity::Temperature),
        humidity: fuse_quantity(series, Quantity::Humidity),
        pressure: fuse_quantity(series, Quantity::Pressure),
    }
}
