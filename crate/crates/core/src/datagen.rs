//! Synthetic compressor current traces with labeled injected anomalies.
//!
//! Randomness comes from SplitMix64 (increment `0x9E3779B97F4A7C15`,
//! mixing multipliers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`, shifts
//! 30/27/31) so fixtures can be regenerated bit for bit in any language.
//! Uniforms take the top 53 bits; normals use the Box-Muller cosine branch.
//!
//! The compressor alternates ON and OFF with durations drawn from normal
//! distributions clamped to `mean ± 3 sd`. While ON the current is
//! `on_amp_a * sin(2π mains_hz t)` plus Gaussian noise of standard deviation
//! `off_noise_a`; while OFF it is that noise alone.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::CurrentSample;

const SCHEDULE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 0xD1B5_4A32_D192_ED03;
const INJECT_STREAM: u64 = 0x8CB9_2BA7_2F3D_8DD7;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller (one value per two uniforms).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub seed: u64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub mains_hz: f64,
    pub on_amp_a: f64,
    pub off_noise_a: f64,
    pub on_mean_s: f64,
    pub on_sd_s: f64,
    pub off_mean_s: f64,
    pub off_sd_s: f64,
}

impl Default for TraceConfig {
    /// A compressed cycle of about 4 s ON and 6 s OFF, sampled at 100 Hz so
    /// that 100-sample RMS windows are 1 s records.
    fn default() -> Self {
        Self {
            seed: 1,
            duration_s: 600.0,
            sample_rate_hz: 100.0,
            mains_hz: 60.0,
            on_amp_a: 1.2,
            off_noise_a: 0.05,
            on_mean_s: 4.0,
            on_sd_s: 0.5,
            off_mean_s: 6.0,
            off_sd_s: 0.5,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be a positive real, got {v}")))
            }
        };
        positive("duration_s", self.duration_s)?;
        positive("sample_rate_hz", self.sample_rate_hz)?;
        positive("mains_hz", self.mains_hz)?;
        positive("on_amp_a", self.on_amp_a)?;
        positive("on_mean_s", self.on_mean_s)?;
        positive("on_sd_s", self.on_sd_s)?;
        positive("off_mean_s", self.off_mean_s)?;
        positive("off_sd_s", self.off_sd_s)?;
        if self.sample_rate_hz > 1000.0 {
            return Err(Error::Config(format!(
                "sample_rate_hz must be at most 1000 for millisecond timestamps, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.off_noise_a.is_finite() && self.off_noise_a >= 0.0) {
            return Err(Error::Config(format!(
                "off_noise_a must be non-negative, got {}",
                self.off_noise_a
            )));
        }
        if self.on_sd_s >= self.on_mean_s {
            return Err(Error::Config("on_sd_s must be smaller than on_mean_s".into()));
        }
        if self.off_sd_s >= self.off_mean_s {
            return Err(Error::Config("off_sd_s must be smaller than off_mean_s".into()));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).floor() as usize
    }

    fn time_of(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate_hz
    }

    fn timestamp_of(&self, i: usize) -> i64 {
        (i as f64 * 1000.0 / self.sample_rate_hz).round() as i64
    }

    fn on_current(&self, t: f64, noise: &mut SplitMix64) -> f64 {
        self.on_amp_a * (2.0 * PI * self.mains_hz * t).sin() + self.noise(noise)
    }

    fn noise(&self, rng: &mut SplitMix64) -> f64 {
        if self.off_noise_a == 0.0 {
            0.0
        } else {
            self.off_noise_a * rng.next_gaussian()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnomalyKind {
    /// Compressor held ON for the whole interval.
    ExtendedRuntime,
    /// ON/OFF alternation with period `magnitude` seconds (ON for the first half).
    ShortCycle,
    /// Compressor held OFF for the whole interval.
    ProlongedOff,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] = [
        AnomalyKind::ExtendedRuntime,
        AnomalyKind::ShortCycle,
        AnomalyKind::ProlongedOff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::ExtendedRuntime => "ExtendedRuntime",
            AnomalyKind::ShortCycle => "ShortCycle",
            AnomalyKind::ProlongedOff => "ProlongedOff",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub start_s: f64,
    pub duration_s: f64,
    /// ShortCycle: cycle period in seconds. Unused by the other kinds.
    pub magnitude: f64,
}

impl AnomalySpec {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    pub fn interval(&self) -> TruthInterval {
        TruthInterval {
            kind: self.kind,
            start_ms: (self.start_s * 1000.0).round() as i64,
            end_ms: (self.end_s() * 1000.0).round() as i64,
        }
    }
}

/// Ground-truth record as written to the truth JSON file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthInterval {
    pub kind: AnomalyKind,
    pub start_ms: i64,
    pub end_ms: i64,
}

impl TruthInterval {
    pub fn contains(&self, timestamp_ms: i64) -> bool {
        (self.start_ms..=self.end_ms).contains(&timestamp_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub samples: Vec<CurrentSample>,
    pub truth: Vec<AnomalySpec>,
}

impl SyntheticTrace {
    pub fn truth_intervals(&self) -> Vec<TruthInterval> {
        self.truth.iter().map(AnomalySpec::interval).collect()
    }
}

fn clamped_normal(rng: &mut SplitMix64, mean: f64, sd: f64) -> f64 {
    (mean + sd * rng.next_gaussian()).clamp(mean - 3.0 * sd, mean + 3.0 * sd)
}

/// Anomaly-free trace. The compressor starts in an ON phase at t = 0.
pub fn generate_trace(cfg: &TraceConfig) -> Result<SyntheticTrace> {
    cfg.validate()?;
    let mut schedule = SplitMix64::new(cfg.seed ^ SCHEDULE_STREAM);
    let mut noise = SplitMix64::new(cfg.seed ^ NOISE_STREAM);

    let n = cfg.sample_count();
    let mut samples = Vec::with_capacity(n);
    let mut on = true;
    let mut phase_end = clamped_normal(&mut schedule, cfg.on_mean_s, cfg.on_sd_s);
    for i in 0..n {
        let t = cfg.time_of(i);
        while t >= phase_end {
            on = !on;
            phase_end += if on {
                clamped_normal(&mut schedule, cfg.on_mean_s, cfg.on_sd_s)
            } else {
                clamped_normal(&mut schedule, cfg.off_mean_s, cfg.off_sd_s)
            };
        }
        let current_a = if on {
            cfg.on_current(t, &mut noise)
        } else {
            cfg.noise(&mut noise)
        };
        samples.push(CurrentSample {
            timestamp_ms: cfg.timestamp_of(i),
            current_a,
        });
    }
    Ok(SyntheticTrace {
        samples,
        truth: Vec::new(),
    })
}

fn check_specs(cfg: &TraceConfig, existing: &[AnomalySpec], specs: &[AnomalySpec]) -> Result<()> {
    let trace_end = cfg.sample_count() as f64 / cfg.sample_rate_hz;
    for s in specs {
        if !(s.start_s.is_finite() && s.duration_s.is_finite() && s.start_s >= 0.0 && s.duration_s > 0.0) {
            return Err(Error::InvalidAnomaly(format!("{s:?} has a bad start or duration")));
        }
        if s.end_s() > trace_end {
            return Err(Error::InvalidAnomaly(format!(
                "{} interval [{}, {}] s extends past the trace end {trace_end} s",
                s.kind.name(),
                s.start_s,
                s.end_s()
            )));
        }
        if s.kind == AnomalyKind::ShortCycle && !(s.magnitude.is_finite() && s.magnitude > 0.0) {
            return Err(Error::InvalidAnomaly(format!(
                "ShortCycle period must be positive, got {}",
                s.magnitude
            )));
        }
    }
    let mut all: Vec<&AnomalySpec> = existing.iter().chain(specs).collect();
    all.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for pair in all.windows(2) {
        if pair[1].start_s < pair[0].end_s() {
            return Err(Error::InvalidAnomaly(format!(
                "{} at {} s overlaps {} at {} s",
                pair[1].kind.name(),
                pair[1].start_s,
                pair[0].kind.name(),
                pair[0].start_s
            )));
        }
    }
    Ok(())
}

/// Overwrites each spec's interval `[start, end)` with the anomalous waveform.
pub fn inject_anomalies(trace: SyntheticTrace, specs: &[AnomalySpec], cfg: &TraceConfig) -> Result<SyntheticTrace> {
    cfg.validate()?;
    check_specs(cfg, &trace.truth, specs)?;
    let SyntheticTrace { mut samples, mut truth } = trace;
    let mut noise = SplitMix64::new(cfg.seed ^ INJECT_STREAM);

    for spec in specs {
        let first = (spec.start_s * cfg.sample_rate_hz).ceil() as usize;
        for (i, sample) in samples.iter_mut().enumerate().skip(first) {
            let t = cfg.time_of(i);
            if t >= spec.end_s() {
                break;
            }
            let on = match spec.kind {
                AnomalyKind::ExtendedRuntime => true,
                AnomalyKind::ProlongedOff => false,
                AnomalyKind::ShortCycle => (t - spec.start_s).rem_euclid(spec.magnitude) < spec.magnitude / 2.0,
            };
            sample.current_a = if on {
                cfg.on_current(t, &mut noise)
            } else {
                cfg.noise(&mut noise)
            };
        }
    }
    truth.extend_from_slice(specs);
    truth.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(SyntheticTrace { samples, truth })
}

/// Evenly spaced anomalies placed after the training prefix.
///
/// Each kind appears `per_kind` times, interleaved. ExtendedRuntime lasts
/// five mean ON durations, ProlongedOff five mean OFF durations, and
/// ShortCycle five mean ON durations at a period of one eighth of the mean
/// ON duration.
pub fn default_anomaly_plan(cfg: &TraceConfig, train_fraction: f64, per_kind: usize) -> Result<Vec<AnomalySpec>> {
    cfg.validate()?;
    let count = per_kind * AnomalyKind::ALL.len();
    if count == 0 {
        return Ok(Vec::new());
    }
    let trace_end = cfg.sample_count() as f64 / cfg.sample_rate_hz;
    // leave a couple of cycles between the training prefix and the first event
    let margin = 2.0 * (cfg.on_mean_s + cfg.off_mean_s);
    let begin = train_fraction * trace_end + margin;
    let slot = (trace_end - margin - begin) / count as f64;

    let spec_for = |kind: AnomalyKind, start_s: f64| match kind {
        AnomalyKind::ExtendedRuntime => AnomalySpec {
            kind,
            start_s,
            duration_s: 5.0 * cfg.on_mean_s,
            magnitude: 0.0,
        },
        AnomalyKind::ShortCycle => AnomalySpec {
            kind,
            start_s,
            duration_s: 5.0 * cfg.on_mean_s,
            magnitude: cfg.on_mean_s / 8.0,
        },
        AnomalyKind::ProlongedOff => AnomalySpec {
            kind,
            start_s,
            duration_s: 5.0 * cfg.off_mean_s,
            magnitude: 0.0,
        },
    };

    let mut plan = Vec::with_capacity(count);
    for i in 0..count {
        let kind = AnomalyKind::ALL[i % AnomalyKind::ALL.len()];
        let spec = spec_for(kind, begin + i as f64 * slot);
        if spec.duration_s + margin > slot {
            return Err(Error::Config(format!(
                "trace of {trace_end} s is too short for {count} anomalies after the training prefix"
            )));
        }
        plan.push(spec);
    }
    Ok(plan)
}

pub fn write_truth_json(truth: &[AnomalySpec]) -> String {
    let intervals: Vec<TruthInterval> = truth.iter().map(AnomalySpec::interval).collect();
    let mut s = serde_json::to_string_pretty(&intervals).expect("truth intervals always serialize");
    s.push('\n');
    s
}

pub fn parse_truth_json(text: &str) -> Result<Vec<TruthInterval>> {
    serde_json::from_str(text).map_err(|e| Error::Csv {
        line: e.line(),
        detail: format!("truth JSON: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, label_states, FeatureConfig, State};
    use crate::signal::{compute_rms_windows, SignalConfig};

    fn quiet() -> TraceConfig {
        TraceConfig {
            off_noise_a: 0.0,
            duration_s: 120.0,
            ..TraceConfig::default()
        }
    }

    #[test]
    fn splitmix_reference_values() {
        // first outputs for seed 1234567 from the reference C implementation
        let mut r = SplitMix64::new(1234567);
        assert_eq!(r.next_u64(), 6457827717110365317);
        assert_eq!(r.next_u64(), 3203168211198807973);
    }

    #[test]
    fn noise_free_off_is_zero() {
        let trace = generate_trace(&quiet()).unwrap();
        let cfg = quiet();
        // first OFF phase begins after the first ON phase (<= 5.5 s)
        let off: Vec<_> = trace
            .samples
            .iter()
            .filter(|s| s.timestamp_ms > 5600 && s.timestamp_ms < 7000)
            .collect();
        assert!(!off.is_empty());
        assert!(off.iter().all(|s| s.current_a == 0.0), "quiet OFF should be zero");
        assert_eq!(trace.samples.len(), cfg.sample_count());
    }

    #[test]
    fn same_seed_same_trace() {
        let a = generate_trace(&TraceConfig::default()).unwrap();
        let b = generate_trace(&TraceConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(&TraceConfig {
            seed: 2,
            ..TraceConfig::default()
        })
        .unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn on_window_rms_is_amp_over_root_two() {
        let cfg = quiet();
        let trace = inject_anomalies(
            generate_trace(&cfg).unwrap(),
            &[AnomalySpec {
                kind: AnomalyKind::ExtendedRuntime,
                start_s: 20.0,
                duration_s: 10.0,
                magnitude: 0.0,
            }],
            &cfg,
        )
        .unwrap();
        let window: Vec<_> = trace.samples[2000..2100].to_vec();
        let recs = compute_rms_windows(&window, &SignalConfig::default());
        assert!((recs[0].rms_a - cfg.on_amp_a / 2f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn prolonged_off_without_noise_is_zero() {
        let cfg = quiet();
        let spec = AnomalySpec {
            kind: AnomalyKind::ProlongedOff,
            start_s: 30.0,
            duration_s: 20.0,
            magnitude: 0.0,
        };
        let trace = inject_anomalies(generate_trace(&cfg).unwrap(), &[spec], &cfg).unwrap();
        assert!(trace.samples[3000..5000].iter().all(|s| s.current_a == 0.0));
        assert_eq!(trace.truth, vec![spec]);
    }

    #[test]
    fn extended_runtime_labels_on() {
        let cfg = TraceConfig::default();
        let spec = AnomalySpec {
            kind: AnomalyKind::ExtendedRuntime,
            start_s: 100.0,
            duration_s: 20.0,
            magnitude: 0.0,
        };
        let trace = inject_anomalies(generate_trace(&cfg).unwrap(), &[spec], &cfg).unwrap();
        let recs = compute_rms_windows(&trace.samples, &SignalConfig::default());
        let labels = label_states(&recs, &FeatureConfig::default());
        let inside: Vec<_> = labels
            .iter()
            .filter(|l| l.timestamp_ms > 100_000 && l.timestamp_ms < 120_000)
            .collect();
        // records end at 100.99 s .. 119.99 s, all fully inside the interval
        assert_eq!(inside.len(), 20);
        assert!(inside.iter().all(|l| l.state == State::On));
    }

    #[test]
    fn empty_spec_is_identity_and_bad_specs_fail() {
        let cfg = TraceConfig::default();
        let base = generate_trace(&cfg).unwrap();
        assert_eq!(inject_anomalies(base.clone(), &[], &cfg).unwrap(), base);

        let a = AnomalySpec {
            kind: AnomalyKind::ProlongedOff,
            start_s: 100.0,
            duration_s: 30.0,
            magnitude: 0.0,
        };
        let b = AnomalySpec { start_s: 120.0, ..a };
        assert!(inject_anomalies(base.clone(), &[a, b], &cfg).is_err());
        let late = AnomalySpec { start_s: 590.0, ..a };
        assert!(inject_anomalies(base.clone(), &[late], &cfg).is_err());
        let bad_period = AnomalySpec {
            kind: AnomalyKind::ShortCycle,
            magnitude: 0.0,
            ..a
        };
        assert!(inject_anomalies(base, &[bad_period], &cfg).is_err());
    }

    #[test]
    fn extended_runtime_exceeds_training_on_durations() {
        let cfg = TraceConfig {
            duration_s: 1200.0,
            ..TraceConfig::default()
        };
        let plan = default_anomaly_plan(&cfg, 0.2, 2).unwrap();
        let trace = inject_anomalies(generate_trace(&cfg).unwrap(), &plan, &cfg).unwrap();
        let feats = extract_features(
            &compute_rms_windows(&trace.samples, &SignalConfig::default()),
            &FeatureConfig::default(),
        );
        let prefix = crate::kmeans::select_training_subset(&feats, 0.2);
        let max_normal = prefix.iter().map(|f| f.on_duration_s).fold(0.0, f64::max);
        for spec in trace.truth.iter().filter(|s| s.kind == AnomalyKind::ExtendedRuntime) {
            assert!(spec.duration_s >= 3.0 * cfg.on_mean_s);
            let iv = spec.interval();
            assert!(feats
                .iter()
                .any(|f| iv.contains(f.timestamp_ms) && f.on_duration_s > max_normal));
        }
    }

    #[test]
    fn truth_json_round_trip() {
        let cfg = TraceConfig {
            duration_s: 1200.0,
            ..TraceConfig::default()
        };
        let plan = default_anomaly_plan(&cfg, 0.2, 2).unwrap();
        let parsed = parse_truth_json(&write_truth_json(&plan)).unwrap();
        assert_eq!(parsed, plan.iter().map(AnomalySpec::interval).collect::<Vec<_>>());
        assert!(default_anomaly_plan(
            &TraceConfig {
                duration_s: 60.0,
                ..cfg
            },
            0.2,
            2
        )
        .is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TraceConfig {
            duration_s: 0.0,
            ..TraceConfig::default()
        }
        .validate()
        .is_err());
        assert!(TraceConfig {
            on_sd_s: 5.0,
            ..TraceConfig::default()
        }
        .validate()
        .is_err());
        assert!(TraceConfig {
            sample_rate_hz: 2000.0,
            ..TraceConfig::default()
        }
        .validate()
        .is_err());
    }
}
