//! Compressor state labeling and the five-dimensional feature vectors.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{self, CleanseReport, CurrentSample, RmsRecord, SignalConfig};

pub const FEATURE_COUNT: usize = 5;

/// Canonical feature order; also the `FEATURES:` line of a model file.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["rms", "rolling_mean", "rolling_std", "rms_slope", "on_duration_s"];

pub const FEATURE_CSV_HEADER: &str = "timestamp_ms,rms,rolling_mean,rolling_std,rms_slope,on_duration_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum State {
    On,
    Off,
}

impl State {
    pub fn as_str(self) -> &'static str {
        match self {
            State::On => "ON",
            State::Off => "OFF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLabel {
    pub timestamp_ms: i64,
    pub state: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub timestamp_ms: i64,
    pub rms: f64,
    pub rolling_mean: f64,
    pub rolling_std: f64,
    /// Amperes per record.
    pub rms_slope: f64,
    pub on_duration_s: f64,
}

impl FeatureVector {
    /// Feature values in [`FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; FEATURE_COUNT] {
        [
            self.rms,
            self.rolling_mean,
            self.rolling_std,
            self.rms_slope,
            self.on_duration_s,
        ]
    }

    pub fn from_values(timestamp_ms: i64, v: [f64; FEATURE_COUNT]) -> Self {
        Self {
            timestamp_ms,
            rms: v[0],
            rolling_mean: v[1],
            rolling_std: v[2],
            rms_slope: v[3],
            on_duration_s: v[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Records in the trailing window for mean, std and slope.
    pub roll_window: usize,
    /// RMS strictly above this is ON.
    pub on_threshold_a: f64,
    /// Seconds between consecutive RMS records.
    pub record_interval_s: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            roll_window: 10,
            on_threshold_a: 0.3,
            record_interval_s: 1.0,
        }
    }
}

impl FeatureConfig {
    /// Defaults with the record interval implied by the windowing and sample rate.
    pub fn for_signal(signal: &SignalConfig, sample_rate_hz: f64) -> Self {
        Self {
            record_interval_s: signal.stride as f64 / sample_rate_hz,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.roll_window < 2 {
            return Err(Error::Config(format!(
                "roll_window must be at least 2, got {}",
                self.roll_window
            )));
        }
        if !(self.on_threshold_a.is_finite() && self.on_threshold_a > 0.0) {
            return Err(Error::Config("on_threshold_a must be a positive real".into()));
        }
        if !(self.record_interval_s.is_finite() && self.record_interval_s > 0.0) {
            return Err(Error::Config("record_interval_s must be a positive real".into()));
        }
        Ok(())
    }
}

pub fn label_states(records: &[RmsRecord], cfg: &FeatureConfig) -> Vec<StateLabel> {
    records
        .iter()
        .map(|r| StateLabel {
            timestamp_ms: r.timestamp_ms,
            state: if r.rms_a > cfg.on_threshold_a {
                State::On
            } else {
                State::Off
            },
        })
        .collect()
}

/// Trailing window ending at `i`, shrunk to the available prefix during warm-up.
fn trailing(values: &[f64], i: usize, w: usize) -> &[f64] {
    &values[(i + 1).saturating_sub(w)..=i]
}

fn is_constant(window: &[f64]) -> bool {
    window.iter().all(|&v| v == window[0])
}

fn window_mean(window: &[f64]) -> f64 {
    if is_constant(window) {
        return window[0];
    }
    window.iter().sum::<f64>() / window.len() as f64
}

pub fn rolling_mean(values: &[f64], w: usize) -> Vec<f64> {
    assert!(w >= 1, "rolling window must be positive");
    (0..values.len()).map(|i| window_mean(trailing(values, i, w))).collect()
}

/// Population standard deviation over the same trailing windows as [`rolling_mean`].
pub fn rolling_std(values: &[f64], w: usize) -> Vec<f64> {
    assert!(w >= 1, "rolling window must be positive");
    (0..values.len())
        .map(|i| {
            let window = trailing(values, i, w);
            if is_constant(window) {
                return 0.0;
            }
            let mean = window_mean(window);
            let ss: f64 = window.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / window.len() as f64).sqrt()
        })
        .collect()
}

/// Endpoint difference quotient across the trailing window; 0 at index 0.
pub fn rms_slope(values: &[f64], w: usize) -> Vec<f64> {
    assert!(w >= 2, "slope window must be at least 2");
    (0..values.len())
        .map(|i| {
            let j = (i + 1).saturating_sub(w);
            if i == j {
                0.0
            } else {
                (values[i] - values[j]) / (i - j) as f64
            }
        })
        .collect()
}

/// Length of the ON run ending at each record, in seconds.
pub fn on_duration(labels: &[StateLabel], cfg: &FeatureConfig) -> Vec<f64> {
    let mut run: u64 = 0;
    labels
        .iter()
        .map(|l| {
            run = match l.state {
                State::On => run + 1,
                State::Off => 0,
            };
            run as f64 * cfg.record_interval_s
        })
        .collect()
}

pub fn extract_features(records: &[RmsRecord], cfg: &FeatureConfig) -> Vec<FeatureVector> {
    let rms: Vec<f64> = records.iter().map(|r| r.rms_a).collect();
    let labels = label_states(records, cfg);
    let mean = rolling_mean(&rms, cfg.roll_window);
    let std = rolling_std(&rms, cfg.roll_window);
    let slope = rms_slope(&rms, cfg.roll_window.max(2));
    let on = on_duration(&labels, cfg);

    records
        .iter()
        .enumerate()
        .map(|(i, r)| FeatureVector {
            timestamp_ms: r.timestamp_ms,
            rms: r.rms_a,
            rolling_mean: mean[i],
            rolling_std: std[i],
            rms_slope: slope[i],
            on_duration_s: on[i],
        })
        .collect()
}

/// Cleanse, window and featurize a raw sample stream in one pass.
pub fn features_from_samples(
    samples: &[CurrentSample],
    signal_cfg: &SignalConfig,
    feature_cfg: &FeatureConfig,
) -> Result<(Vec<FeatureVector>, CleanseReport)> {
    signal_cfg.validate()?;
    feature_cfg.validate()?;
    let (clean, report) = signal::cleanse(samples, signal_cfg);
    let records = signal::compute_rms_windows(&clean, signal_cfg);
    Ok((extract_features(&records, feature_cfg), report))
}

pub fn write_feature_csv(features: &[FeatureVector]) -> String {
    let mut out = String::with_capacity(64 * (features.len() + 1));
    out.push_str(FEATURE_CSV_HEADER);
    out.push('\n');
    for f in features {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            f.timestamp_ms, f.rms, f.rolling_mean, f.rolling_std, f.rms_slope, f.on_duration_s
        );
    }
    out
}

pub fn parse_feature_csv(text: &str) -> Result<Vec<FeatureVector>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == FEATURE_CSV_HEADER => {}
        _ => {
            return Err(Error::Csv {
                line: 1,
                detail: format!("expected header `{FEATURE_CSV_HEADER}`"),
            })
        }
    }
    lines
        .map(|(idx, row)| {
            let line = idx + 1;
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != FEATURE_COUNT + 1 {
                return Err(Error::Csv {
                    line,
                    detail: format!("expected {} fields, found {}", FEATURE_COUNT + 1, fields.len()),
                });
            }
            let timestamp_ms = fields[0].parse::<i64>().map_err(|e| Error::Csv {
                line,
                detail: format!("bad timestamp_ms: {e}"),
            })?;
            let mut v = [0.0; FEATURE_COUNT];
            for (slot, field) in v.iter_mut().zip(&fields[1..]) {
                *slot = field.parse::<f64>().map_err(|e| Error::Csv {
                    line,
                    detail: format!("bad value `{field}`: {e}"),
                })?;
            }
            Ok(FeatureVector::from_values(timestamp_ms, v))
        })
        .collect()
}
