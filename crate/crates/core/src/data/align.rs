use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CalibrationDataset, FusedFeatures, HourRow, Quantity, ReferenceSeries, HOUR};
use crate::error::{Error, Result};

/// Longest run of missing feature hours that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: i64 = 2;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    /// Feature hours with no matching reference value.
    pub dropped_missing_reference: usize,
    /// Reference hours dropped because a feature gap was too long or unbounded.
    pub dropped_feature_gap: usize,
    /// Kept rows where at least one feature was interpolated.
    pub interpolated: usize,
    pub kept: usize,
}

/// Joins fused features with the reference on the hourly grid.
///
/// Feature gaps of at most [`MAX_INTERPOLATED_GAP`] consecutive hours with
/// values on both sides are filled linearly; rows in longer gaps are dropped.
pub fn align_and_clean(fused: &FusedFeatures, reference: &ReferenceSeries) -> Result<(CalibrationDataset, CleanReport)> {
    let mut report = CleanReport {
        dropped_missing_reference: fused.pm25.keys().filter(|t| !reference.contains_key(t)).count(),
        ..CleanReport::default()
    };
    let mut rows = Vec::new();
    for (&ts, &reference) in reference {
        let mut interpolated = false;
        let mut values = [0.0; 4];
        let mut ok = true;
        for (slot, q) in values.iter_mut().zip(Quantity::ALL) {
            match lookup(fused.get(q), ts) {
                Some((v, interp)) => {
                    *slot = v;
                    interpolated |= interp;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            report.dropped_feature_gap += 1;
            continue;
        }
        report.interpolated += usize::from(interpolated);
        rows.push(HourRow {
            timestamp: ts,
            pm25: values[0],
            temperature: values[1],
            humidity: values[2],
            pressure: values[3],
            reference,
        });
    }
    if rows.is_empty() {
        return Err(Error::Data("no hours shared by low-cost features and reference".into()));
    }
    report.kept = rows.len();
    log::info!(
        "aligned {} hours ({} interpolated, {} dropped for gaps, {} without reference)",
        report.kept,
        report.interpolated,
        report.dropped_feature_gap,
        report.dropped_missing_reference
    );
    Ok((CalibrationDataset::new(rows)?, report))
}

fn lookup(series: &BTreeMap<i64, f64>, ts: i64) -> Option<(f64, bool)> {
    if let Some(&v) = series.get(&ts) {
        return Some((v, false));
    }
    let (&t0, &v0) = series.range(..ts).next_back()?;
    let (&t1, &v1) = series.range(ts + 1..).next()?;
    let missing = (t1 - t0) / HOUR - 1;
    if missing > MAX_INTERPOLATED_GAP {
        return None;
    }
    let w = (ts - t0) as f64 / (t1 - t0) as f64;
    Some((v0 + w * (v1 - v0), true))
}
