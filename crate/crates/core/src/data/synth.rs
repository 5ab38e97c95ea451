//! Deterministic synthetic measurement campaign.
//!
//! The reference signal is positive with a slow seasonal trend, a diurnal
//! cycle and an AR(1) weather component. Each low-cost PM2.5 sensor reads
//!
//! `gain_s · ref · (1 + k · max(0, RH − 50) / 50) + offset_s + noise`
//!
//! while environmental sensors read the true value plus noise.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Quantity, RawSample, ReferenceSeries, HOUR};
use crate::error::{Error, Result};

/// 2022-11-01T00:00:00Z
pub const DEFAULT_START: i64 = 1_667_260_800;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub n_pm_sensors: usize,
    pub n_env_sensors: usize,
    pub samples_per_hour: usize,
    pub gain: f64,
    pub offset: f64,
    pub humidity_coeff: f64,
    pub noise_sd: f64,
    /// Relative spread of per-sensor gain and offset.
    pub sensor_spread: f64,
    pub env_noise_sd: f64,
    /// Probability that a reference hour is missing.
    pub reference_dropout: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            n_pm_sensors: 5,
            n_env_sensors: 3,
            samples_per_hour: 6,
            gain: 1.35,
            offset: 3.0,
            humidity_coeff: 0.6,
            noise_sd: 2.0,
            sensor_spread: 0.05,
            env_noise_sd: 0.2,
            reference_dropout: 0.01,
        }
    }
}

impl SynthProfile {
    /// Sensors read the reference exactly.
    pub fn perfect() -> Self {
        Self {
            gain: 1.0,
            offset: 0.0,
            humidity_coeff: 0.0,
            noise_sd: 0.0,
            sensor_spread: 0.0,
            env_noise_sd: 0.0,
            reference_dropout: 0.0,
            ..Self::default()
        }
    }

    pub fn gain_only(gain: f64) -> Self {
        Self {
            gain,
            ..Self::perfect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCampaign {
    pub low_cost: Vec<RawSample>,
    pub reference: ReferenceSeries,
}

struct Ar1 {
    phi: f64,
    state: f64,
    noise: Normal<f64>,
}

impl Ar1 {
    fn new(phi: f64, sd: f64) -> Self {
        // innovation sd chosen so the stationary sd is `sd`
        let innov = sd * (1.0 - phi * phi).sqrt();
        Self {
            phi,
            state: 0.0,
            noise: Normal::new(0.0, innov.max(0.0)).expect("valid sd"),
        }
    }

    fn next<R: Rng>(&mut self, rng: &mut R) -> f64 {
        self.state = self.phi * self.state + self.noise.sample(rng);
        self.state
    }
}

pub fn synthesize(seed: u64, n_hours: usize, profile: &SynthProfile) -> Result<SyntheticCampaign> {
    if n_hours < 48 {
        return Err(Error::Config(format!("synthetic campaign needs at least 48 hours, got {n_hours}")));
    }
    if profile.n_pm_sensors == 0 || profile.samples_per_hour == 0 || profile.samples_per_hour > 3600 {
        return Err(Error::Config("synthetic profile needs sensors and 1..=3600 samples per hour".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weather = Ar1::new(0.95, 0.35);
    let mut temp_drift = Ar1::new(0.98, 2.0);
    let mut hum_drift = Ar1::new(0.9, 6.0);
    let mut press_drift = Ar1::new(0.99, 4.0);

    struct Hour {
        ts: i64,
        reference: f64,
        temperature: f64,
        humidity: f64,
        pressure: f64,
    }
    let hours: Vec<Hour> = (0..n_hours)
        .map(|h| {
            let hf = h as f64;
            let season = 1.0 + 0.35 * (TAU * hf / (24.0 * 45.0)).cos();
            let diurnal = 1.0 + 0.3 * (TAU * (hf - 7.0) / 24.0).sin() + 0.15 * (TAU * (hf - 18.0) / 12.0).sin();
            let reference = (22.0 * season * diurnal * weather.next(&mut rng).exp()).max(1.0);
            let temperature = 9.0 + 5.0 * (TAU * (hf - 9.0) / 24.0).sin() + temp_drift.next(&mut rng);
            let humidity = (72.0 - 2.2 * (temperature - 9.0) + hum_drift.next(&mut rng)).clamp(15.0, 99.0);
            let pressure = 1013.0 + 5.0 * (TAU * hf / (24.0 * 6.0)).sin() + press_drift.next(&mut rng);
            Hour {
                ts: DEFAULT_START + h as i64 * HOUR,
                reference,
                temperature,
                humidity,
                pressure,
            }
        })
        .collect();

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let pm_sensors: Vec<(String, f64, f64)> = (0..profile.n_pm_sensors)
        .map(|k| {
            let g = profile.gain * (1.0 + profile.sensor_spread * unit.sample(&mut rng));
            let o = profile.offset * (1.0 + profile.sensor_spread * unit.sample(&mut rng));
            (format!("pm{k:02}"), g, o)
        })
        .collect();
    let env_sensors: Vec<(String, [f64; 3])> = (0..profile.n_env_sensors)
        .map(|k| {
            let bias = [0.5, 2.0, 0.8].map(|s| s * profile.env_noise_sd * unit.sample(&mut rng));
            (format!("env{k:02}"), bias)
        })
        .collect();

    let step = HOUR / profile.samples_per_hour as i64;
    let mut low_cost = Vec::with_capacity(n_hours * profile.samples_per_hour * (pm_sensors.len() + 3 * env_sensors.len()));
    let noisy = |rng: &mut ChaCha8Rng, sd: f64| if sd > 0.0 { sd * unit.sample(rng) } else { 0.0 };
    for hour in &hours {
        let hum_factor = 1.0 + profile.humidity_coeff * ((hour.humidity - 50.0).max(0.0) / 50.0);
        for k in 0..profile.samples_per_hour {
            let ts = hour.ts + k as i64 * step;
            for (id, g, o) in &pm_sensors {
                let v = g * hour.reference * hum_factor + o + noisy(&mut rng, profile.noise_sd);
                low_cost.push(RawSample {
                    timestamp: ts,
                    sensor_id: id.clone(),
                    quantity: Quantity::Pm25,
                    value: v.max(0.0),
                });
            }
            for (id, bias) in &env_sensors {
                let truth = [hour.temperature, hour.humidity, hour.pressure];
                let qs = [Quantity::Temperature, Quantity::Humidity, Quantity::Pressure];
                for ((q, t), b) in qs.into_iter().zip(truth).zip(bias) {
                    low_cost.push(RawSample {
                        timestamp: ts,
                        sensor_id: id.clone(),
                        quantity: q,
                        value: t + b + noisy(&mut rng, profile.env_noise_sd),
                    });
                }
            }
        }
    }

    let mut reference = BTreeMap::new();
    for hour in &hours {
        let dropped = profile.reference_dropout > 0.0 && rng.random::<f64>() < profile.reference_dropout;
        if !dropped {
            reference.insert(hour.ts, hour.reference);
        }
    }
    Ok(SyntheticCampaign { low_cost, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_dataset, write_low_cost, write_reference};
    use crate::neural::{loss, LossKind};

    fn bytes(c: &SyntheticCampaign) -> Vec<u8> {
        let mut buf = Vec::new();
        write_low_cost(&c.low_cost, &mut buf).unwrap();
        write_reference(&c.reference, &mut buf).unwrap();
        buf
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SynthProfile::default();
        assert_eq!(bytes(&synthesize(7, 48, &p).unwrap()), bytes(&synthesize(7, 48, &p).unwrap()));
        assert_ne!(bytes(&synthesize(7, 48, &p).unwrap()), bytes(&synthesize(8, 48, &p).unwrap()));
    }

    #[test]
    fn perfect_profile_has_zero_benchmark() {
        let c = synthesize(1, 72, &SynthProfile::perfect()).unwrap();
        let (ds, _) = build_dataset(&c.low_cost, &c.reference).unwrap();
        assert_eq!(ds.len(), 72);
        assert_eq!(loss(LossKind::L1, &ds.raw_pm25(), &ds.targets()).unwrap(), 0.0);
    }

    #[test]
    fn gain_profile_is_miscalibrated() {
        let c = synthesize(1, 72, &SynthProfile::gain_only(1.5)).unwrap();
        let (ds, _) = build_dataset(&c.low_cost, &c.reference).unwrap();
        assert!(loss(LossKind::L1, &ds.raw_pm25(), &ds.targets()).unwrap() > 0.0);
    }

    #[test]
    fn too_short() {
        assert!(synthesize(1, 47, &SynthProfile::default()).is_err());
    }
}
