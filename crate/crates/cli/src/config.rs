//! Plain-text `key = value` run configuration.
//!
//! One setting per line; blank lines and lines starting with `#` are
//! ignored. Every key is optional and falls back to the library default.
//!
//! | key | meaning |
//! |-----|---------|
//! | `window_len`, `stride`, `spike_clamp_a` | RMS windowing and cleansing |
//! | `roll_window`, `on_threshold_a`, `record_interval_s` | feature extraction; the interval defaults to `stride / sample_rate_hz` |
//! | `k`, `iterations`, `train_fraction`, `percentile`, `scale` | K-Means training |
//! | `z_threshold` | Z-Score baseline |
//! | `seed`, `duration_s`, `sample_rate_hz`, `mains_hz`, `on_amp_a`, `off_noise_a`, `on_mean_s`, `on_sd_s`, `off_mean_s`, `off_sd_s` | synthetic trace |
//! | `anomalies_per_kind` | size of the default injection plan (default 0) |
//! | `anomaly` | explicit injection `Kind,start_s,duration_s,magnitude`; repeatable, replaces the default plan |

use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use diol_core::datagen::{AnomalyKind, AnomalySpec, TraceConfig};
use diol_core::zscore::DEFAULT_Z_THRESHOLD;
use diol_core::{FeatureConfig, SignalConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub signal: SignalConfig,
    /// Explicit record interval; `None` derives it from the windowing.
    pub record_interval_s: Option<f64>,
    pub roll_window: usize,
    pub on_threshold_a: f64,
    pub train: TrainConfig,
    pub z_threshold: f64,
    pub trace: TraceConfig,
    pub anomalies_per_kind: usize,
    pub anomalies: Vec<AnomalySpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let features = FeatureConfig::default();
        Self {
            signal: SignalConfig::default(),
            record_interval_s: None,
            roll_window: features.roll_window,
            on_threshold_a: features.on_threshold_a,
            train: TrainConfig::default(),
            z_threshold: DEFAULT_Z_THRESHOLD,
            trace: TraceConfig::default(),
            anomalies_per_kind: 0,
            anomalies: Vec::new(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow::anyhow!("`{key}` has unparsable value `{value}`"))
}

fn parse_anomaly(value: &str) -> Result<AnomalySpec> {
    let fields: Vec<&str> = value.split(',').map(str::trim).collect();
    let [kind, start, duration, magnitude] = fields[..] else {
        bail!("`anomaly` needs Kind,start_s,duration_s,magnitude, got `{value}`");
    };
    let kind = AnomalyKind::from_name(kind).with_context(|| {
        format!("unknown anomaly kind `{kind}` (expected ExtendedRuntime, ShortCycle or ProlongedOff)")
    })?;
    Ok(AnomalySpec {
        kind,
        start_s: parse_value("anomaly start_s", start)?,
        duration_s: parse_value("anomaly duration_s", duration)?,
        magnitude: parse_value("anomaly magnitude", magnitude)?,
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("config line {}: expected `key = value`", idx + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("config line {}", idx + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "window_len" => self.signal.window_len = parse_value(key, v)?,
            "stride" => self.signal.stride = parse_value(key, v)?,
            "spike_clamp_a" => self.signal.spike_clamp_a = parse_value(key, v)?,
            "roll_window" => self.roll_window = parse_value(key, v)?,
            "on_threshold_a" => self.on_threshold_a = parse_value(key, v)?,
            "record_interval_s" => self.record_interval_s = Some(parse_value(key, v)?),
            "k" => self.train.k = parse_value(key, v)?,
            "iterations" => self.train.iterations = parse_value(key, v)?,
            "train_fraction" => self.train.train_fraction = parse_value(key, v)?,
            "percentile" => self.train.percentile = parse_value(key, v)?,
            "scale" => self.train.scale = parse_value(key, v)?,
            "z_threshold" => self.z_threshold = parse_value(key, v)?,
            "seed" => self.trace.seed = parse_value(key, v)?,
            "duration_s" => self.trace.duration_s = parse_value(key, v)?,
            "sample_rate_hz" => self.trace.sample_rate_hz = parse_value(key, v)?,
            "mains_hz" => self.trace.mains_hz = parse_value(key, v)?,
            "on_amp_a" => self.trace.on_amp_a = parse_value(key, v)?,
            "off_noise_a" => self.trace.off_noise_a = parse_value(key, v)?,
            "on_mean_s" => self.trace.on_mean_s = parse_value(key, v)?,
            "on_sd_s" => self.trace.on_sd_s = parse_value(key, v)?,
            "off_mean_s" => self.trace.off_mean_s = parse_value(key, v)?,
            "off_sd_s" => self.trace.off_sd_s = parse_value(key, v)?,
            "anomalies_per_kind" => self.anomalies_per_kind = parse_value(key, v)?,
            "anomaly" => self.anomalies.push(parse_anomaly(v)?),
            _ => bail!("unknown key `{key}`"),
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureConfig {
        let derived = FeatureConfig::for_signal(&self.signal, self.trace.sample_rate_hz);
        FeatureConfig {
            roll_window: self.roll_window,
            on_threshold_a: self.on_threshold_a,
            record_interval_s: self.record_interval_s.unwrap_or(derived.record_interval_s),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.features().validate()?;
        self.train.validate()?;
        self.trace.validate()?;
        if !(self.z_threshold.is_finite() && self.z_threshold > 0.0) {
            bail!("z_threshold must be a positive real, got {}", self.z_threshold);
        }
        if self.anomalies_per_kind > 0 && !self.anomalies.is_empty() {
            bail!("use either `anomalies_per_kind` or explicit `anomaly` lines, not both");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::default().features(), FeatureConfig::default());
    }

    #[test]
    fn keys_map_to_fields() {
        let text = "# trace\nseed = 9\nduration_s=120\n\nk = 4\nscale = 1.5\nstride = 50\n\
                    anomaly = ShortCycle, 30, 10, 0.5\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.trace.seed, 9);
        assert_eq!(cfg.trace.duration_s, 120.0);
        assert_eq!(cfg.train.k, 4);
        assert_eq!(cfg.train.scale, 1.5);
        assert_eq!(cfg.features().record_interval_s, 0.5);
        assert_eq!(cfg.anomalies.len(), 1);
        assert_eq!(cfg.anomalies[0].kind, AnomalyKind::ShortCycle);
    }

    #[test]
    fn rejections_name_the_problem() {
        let err = |t: &str| format!("{:#}", RunConfig::parse(t).unwrap_err());
        assert!(err("duration_s = 0").contains("duration_s"));
        assert!(err("duration_s = -5").contains("duration_s"));
        assert!(err("colour = red").contains("unknown key `colour`"));
        assert!(err("k = three").contains("`k`"));
        assert!(err("just words").contains("line 1"));
        assert!(err("anomaly = Spike,1,2,3").contains("Spike"));
        assert!(err("anomalies_per_kind = 1\nanomaly = ProlongedOff,100,30,0").contains("not both"));
    }
}
