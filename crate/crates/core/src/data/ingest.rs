//! CSV readers and writers.
//!
//! Low-cost readings: `timestamp_iso8601,sensor_id,quantity,value`.
//! Reference station: `timestamp_iso8601,pm25_ug_m3`.
//! Processed dataset: `timestamp,pm25,temp,hum,press,ref_pm25`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};

use super::{CalibrationDataset, HourRow, RawSample, ReferenceSeries, HOUR};
use crate::error::{Error, Result};

const LOW_COST_HEADER: [&str; 4] = ["timestamp_iso8601", "sensor_id", "quantity", "value"];
const REFERENCE_HEADER: [&str; 2] = ["timestamp_iso8601", "pm25_ug_m3"];
const DATASET_HEADER: [&str; 6] = ["timestamp", "pm25", "temp", "hum", "press", "ref_pm25"];

/// How to read timestamps that carry no UTC offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NaiveTime {
    /// Seconds east of UTC of the clock that produced naive timestamps.
    pub offset_seconds: i32,
}

pub fn parse_timestamp(s: &str, naive: NaiveTime) -> Result<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp() - i64::from(naive.offset_seconds));
        }
    }
    Err(Error::Data(format!("unparseable timestamp '{s}'")))
}

pub fn format_timestamp(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| ts.to_string())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub samples: Vec<RawSample>,
    /// Rows that failed to parse, across all files.
    pub malformed: usize,
}

fn check_header(path: &Path, got: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let ok = got.len() == expected.len()
        && got.iter().zip(expected).all(|(g, e)| g.trim().eq_ignore_ascii_case(e));
    if ok {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "{}: expected header '{}', found '{}'",
            path.display(),
            expected.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )))
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path)?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

/// Reads low-cost sensor CSVs. Unparseable rows are counted, not returned.
pub fn ingest<P: AsRef<Path>>(paths: &[P], naive: NaiveTime) -> Result<Ingested> {
    let mut out = Ingested::default();
    for path in paths {
        let path = path.as_ref();
        let mut rdr = open(path)?;
        let header = rdr.headers()?.clone();
        if header.is_empty() {
            continue;
        }
        check_header(path, &header, &LOW_COST_HEADER)?;
        for rec in rdr.records() {
            let rec = rec?;
            match parse_low_cost(&rec, naive) {
                Some(s) => out.samples.push(s),
                None => out.malformed += 1,
            }
        }
    }
    if out.malformed > 0 {
        log::warn!("skipped {} malformed low-cost rows", out.malformed);
    }
    out.samples.sort_by_key(|s| s.timestamp);
    Ok(out)
}

fn parse_low_cost(rec: &csv::StringRecord, naive: NaiveTime) -> Option<RawSample> {
    if rec.len() != 4 {
        return None;
    }
    let value: f64 = rec[3].trim().parse().ok()?;
    if !value.is_finite() {
        return None;
    }
    Some(RawSample {
        timestamp: parse_timestamp(&rec[0], naive).ok()?,
        sensor_id: rec[1].trim().to_string(),
        quantity: rec[2].parse().ok()?,
        value,
    })
}

/// Reads the reference CSV, flooring timestamps to the hour. Returns the
/// series and the malformed-row count.
pub fn ingest_reference(path: &Path, naive: NaiveTime) -> Result<(ReferenceSeries, usize)> {
    let mut rdr = open(path)?;
    let header = rdr.headers()?.clone();
    let mut series = ReferenceSeries::new();
    let mut malformed = 0;
    if header.is_empty() {
        return Ok((series, 0));
    }
    check_header(path, &header, &REFERENCE_HEADER)?;
    for rec in rdr.records() {
        let rec = rec?;
        let parsed = (rec.len() == 2)
            .then(|| {
                let ts = parse_timestamp(&rec[0], naive).ok()?;
                let v: f64 = rec[1].trim().parse().ok()?;
                v.is_finite().then_some((ts.div_euclid(HOUR) * HOUR, v))
            })
            .flatten();
        match parsed {
            Some((ts, v)) => {
                series.insert(ts, v);
            }
            None => malformed += 1,
        }
    }
    if malformed > 0 {
        log::warn!("{}: skipped {malformed} malformed reference rows", path.display());
    }
    Ok((series, malformed))
}

pub fn write_low_cost<W: Write>(samples: &[RawSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOW_COST_HEADER)?;
    for s in samples {
        w.write_record([
            format_timestamp(s.timestamp),
            s.sensor_id.clone(),
            s.quantity.as_str().to_string(),
            s.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_reference<W: Write>(reference: &ReferenceSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REFERENCE_HEADER)?;
    for (&ts, v) in reference {
        w.write_record([format_timestamp(ts), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset<W: Write>(ds: &CalibrationDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER)?;
    for r in &ds.rows {
        w.write_record([
            format_timestamp(r.timestamp),
            r.pm25.to_string(),
            r.temperature.to_string(),
            r.humidity.to_string(),
            r.pressure.to_string(),
            r.reference.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<CalibrationDataset> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    check_header(Path::new("dataset"), &header, &DATASET_HEADER)?;
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("dataset row {}: bad number '{}'", k + 1, &rec[i])))
        };
        rows.push(HourRow {
            timestamp: parse_timestamp(&rec[0], NaiveTime::default())?,
            pm25: num(1)?,
            temperature: num(2)?,
            humidity: num(3)?,
            pressure: num(4)?,
            reference: num(5)?,
        });
    }
    CalibrationDataset::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Quantity;

    fn tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1970-01-01T01:00:00Z", NaiveTime::default()).unwrap(), 3600);
        assert_eq!(parse_timestamp("1970-01-01T01:00:00+01:00", NaiveTime::default()).unwrap(), 0);
        let cet = NaiveTime { offset_seconds: 3600 };
        assert_eq!(parse_timestamp("1970-01-01 01:00:00", cet).unwrap(), 0);
        assert!(parse_timestamp("yesterday", NaiveTime::default()).is_err());
        assert_eq!(format_timestamp(3600), "1970-01-01T01:00:00Z");
    }

    #[test]
    fn empty_file_is_empty() {
        let f = tmp("");
        let got = ingest(&[f.path()], NaiveTime::default()).unwrap();
        assert!(got.samples.is_empty());
        assert_eq!(got.malformed, 0);
    }

    #[test]
    fn one_good_row_and_one_bad() {
        let f = tmp("timestamp_iso8601,sensor_id,quantity,value\n\
                     2023-01-01T00:00:05Z,s1,pm25,12.5\n\
                     2023-01-01T00:00:06Z,s1,pm25,abc\n");
        let got = ingest(&[f.path()], NaiveTime::default()).unwrap();
        assert_eq!(got.samples.len(), 1);
        assert_eq!(got.samples[0].value, 12.5);
        assert_eq!(got.samples[0].quantity, Quantity::Pm25);
        assert_eq!(got.malformed, 1);
    }

    #[test]
    fn schema_violation_and_missing_file() {
        let f = tmp("time,value\n0,1\n");
        assert!(matches!(ingest(&[f.path()], NaiveTime::default()), Err(Error::Data(_))));
        assert!(matches!(
            ingest(&[Path::new("/nonexistent/file.csv")], NaiveTime::default()),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn reference_floors_to_hour() {
        let f = tmp("timestamp_iso8601,pm25_ug_m3\n2023-01-01T00:30:00Z,10\n2023-01-01T01:00:00Z,x\n");
        let (s, bad) = ingest_reference(f.path(), NaiveTime::default()).unwrap();
        assert_eq!(bad, 1);
        let ts = parse_timestamp("2023-01-01T00:00:00Z", NaiveTime::default()).unwrap();
        assert_eq!(s[&ts], 10.0);
    }

    #[test]
    fn dataset_round_trip() {
        let ds = CalibrationDataset::new(vec![
            HourRow {
                timestamp: 0,
                pm25: 1.1,
                temperature: 2.2,
                humidity: 33.3,
                pressure: 1013.25,
                reference: 0.1 + 0.2,
            },
            HourRow {
                timestamp: 3600,
                pm25: 4.0,
                temperature: -1.5,
                humidity: 90.0,
                pressure: 1000.0,
                reference: 7.0,
            },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("timestamp,pm25,temp,hum,press,ref_pm25\n"));
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), ds);
    }
}
