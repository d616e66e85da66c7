//! Raw current samples: CSV ingestion, cleansing and fixed-window RMS.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLE_CSV_HEADER: &str = "timestamp_ms,current_a";

/// One instantaneous current reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentSample {
    pub timestamp_ms: i64,
    pub current_a: f64,
}

impl CurrentSample {
    pub fn new(timestamp_ms: i64, current_a: f64) -> Self {
        Self {
            timestamp_ms,
            current_a,
        }
    }
}

/// Root-mean-square current over one window, stamped with the window's last sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsRecord {
    pub timestamp_ms: i64,
    pub rms_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalConfig {
    /// Samples per RMS window.
    pub window_len: usize,
    /// Samples between consecutive window starts.
    pub stride: usize,
    /// Cleansing cap on |current|, amperes.
    pub spike_clamp_a: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            window_len: 100,
            stride: 100,
            spike_clamp_a: 30.0,
        }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::Config("window_len must be positive".into()));
        }
        if self.stride == 0 || self.stride > self.window_len {
            return Err(Error::Config(format!(
                "stride must be in 1..={} (window_len), got {}",
                self.window_len, self.stride
            )));
        }
        if !(self.spike_clamp_a.is_finite() && self.spike_clamp_a > 0.0) {
            return Err(Error::Config(format!(
                "spike_clamp_a must be a positive real, got {}",
                self.spike_clamp_a
            )));
        }
        Ok(())
    }
}

/// What [`cleanse`] removed or altered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CleanseReport {
    pub dropped_non_finite: usize,
    pub dropped_non_increasing: usize,
    pub clamped: usize,
}

/// Parses the sample CSV (`timestamp_ms,current_a` header, one sample per row).
///
/// Line numbers in errors are 1-based; the header is line 1.
pub fn parse_sample_csv(text: &str) -> Result<Vec<CurrentSample>> {
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == SAMPLE_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Csv {
                line: 1,
                detail: format!("expected header `{SAMPLE_CSV_HEADER}`, found `{header}`"),
            })
        }
        None => unreachable!("split yields at least one item"),
    }

    let mut samples = Vec::new();
    let mut rest = lines.peekable();
    while let Some((idx, raw)) = rest.next() {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        // A final LF leaves one empty trailing item.
        if row.is_empty() && rest.peek().is_none() {
            break;
        }
        let mut fields = row.split(',');
        let (Some(ts), Some(cur), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Csv {
                line,
                detail: format!("expected 2 fields, found `{row}`"),
            });
        };
        let timestamp_ms = ts.parse::<i64>().map_err(|e| Error::Csv {
            line,
            detail: format!("bad timestamp_ms `{ts}`: {e}"),
        })?;
        let current_a = cur.parse::<f64>().map_err(|e| Error::Csv {
            line,
            detail: format!("bad current_a `{cur}`: {e}"),
        })?;
        samples.push(CurrentSample {
            timestamp_ms,
            current_a,
        });
    }
    Ok(samples)
}

/// Writes samples in the CSV grammar accepted by [`parse_sample_csv`].
///
/// Currents are printed with the shortest decimal that parses back to the same `f64`.
pub fn write_sample_csv(samples: &[CurrentSample]) -> String {
    let mut out = String::with_capacity(16 * (samples.len() + 1));
    out.push_str(SAMPLE_CSV_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(out, "{},{}", s.timestamp_ms, s.current_a);
    }
    out
}

/// Drops non-finite readings and non-increasing timestamps, then clamps spikes.
pub fn cleanse(samples: &[CurrentSample], cfg: &SignalConfig) -> (Vec<CurrentSample>, CleanseReport) {
    let mut report = CleanseReport::default();
    let mut out: Vec<CurrentSample> = Vec::with_capacity(samples.len());
    let clamp = cfg.spike_clamp_a;

    for s in samples {
        if !s.current_a.is_finite() {
            report.dropped_non_finite += 1;
            continue;
        }
        if out.last().is_some_and(|prev| s.timestamp_ms <= prev.timestamp_ms) {
            report.dropped_non_increasing += 1;
            continue;
        }
        let mut current_a = s.current_a;
        if current_a.abs() > clamp {
            current_a = clamp.copysign(current_a);
            report.clamped += 1;
        }
        out.push(CurrentSample {
            timestamp_ms: s.timestamp_ms,
            current_a,
        });
    }
    (out, report)
}

/// Number of full windows that fit in `n` samples.
pub fn window_count(n: usize, cfg: &SignalConfig) -> usize {
    if n < cfg.window_len {
        0
    } else {
        (n - cfg.window_len) / cfg.stride + 1
    }
}

/// RMS over each full window of `window_len` samples, advancing by `stride`.
/// A trailing partial window is discarded.
pub fn compute_rms_windows(samples: &[CurrentSample], cfg: &SignalConfig) -> Vec<RmsRecord> {
    let count = window_count(samples.len(), cfg);
    (0..count)
        .map(|w| {
            let window = &samples[w * cfg.stride..w * cfg.stride + cfg.window_len];
            let sum_sq: f64 = window.iter().map(|s| s.current_a * s.current_a).sum();
            RmsRecord {
                timestamp_ms: window[window.len() - 1].timestamp_ms,
                rms_a: (sum_sq / window.len() as f64).sqrt(),
            }
        })
        .collect()
}
