//! The workflows behind each subcommand. Each returns a serializable report;
//! printing and exit codes are left to the binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use diol_core::datagen::{self, parse_truth_json, TruthInterval};
use diol_core::diol::{self, EquivalenceResult};
use diol_core::features::{self, features_from_samples, write_feature_csv};
use diol_core::kmeans::{self, write_verdict_csv};
use diol_core::signal::parse_sample_csv;
use diol_core::zscore::{infer_zscore, train_zscore};
use diol_core::{AnomalyVerdict, Error, FeatureVector, State};
use serde::Serialize;

use crate::config::RunConfig;
use crate::metrics::{self, DetectionMetrics, IntervalAgreement};

pub const TIMELINE_CSV_HEADER: &str = "timestamp_ms,rms,state,is_anomaly";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub records_processed: usize,
    pub anomalies_flagged: usize,
    /// Records scored per second of the inference stage.
    pub throughput_records_per_s: f64,
    pub stage_timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    KMeans,
    ZScore,
}

/// Stage timer feeding `stage_timings_ms`.
#[derive(Debug, Default)]
struct Stages(BTreeMap<String, f64>);

impl Stages {
    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f().with_context(|| format!("{name} stage failed"))?;
        self.0.insert(name.to_string(), t.elapsed().as_secs_f64() * 1e3);
        Ok(out)
    }

    fn summary(self, verdicts: &[AnomalyVerdict]) -> RunSummary {
        let infer_s = self.0.get("infer").copied().unwrap_or(0.0) / 1e3;
        RunSummary {
            records_processed: verdicts.len(),
            anomalies_flagged: verdicts.iter().filter(|v| v.is_anomaly).count(),
            throughput_records_per_s: verdicts.len() as f64 / infer_s.max(1e-9),
            stage_timings_ms: self.0,
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Sample CSV → cleansed samples → RMS records → feature vectors.
fn load_features(samples: &Path, cfg: &RunConfig, stages: &mut Stages) -> Result<Vec<FeatureVector>> {
    let parsed = stages.run("ingest", || {
        parse_sample_csv(&read(samples)?).with_context(|| samples.display().to_string())
    })?;
    let features = stages.run("features", || {
        let (features, report) = features_from_samples(&parsed, &cfg.signal, &cfg.features())?;
        log::info!(
            "{} samples: {} non-finite dropped, {} non-increasing dropped, {} clamped; {} feature records",
            parsed.len(),
            report.dropped_non_finite,
            report.dropped_non_increasing,
            report.clamped,
            features.len()
        );
        Ok(features)
    })?;
    if features.is_empty() {
        bail!(
            "no feature records: {} samples do not fill one {}-sample RMS window",
            parsed.len(),
            cfg.signal.window_len
        );
    }
    Ok(features)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenDataReport {
    pub samples: usize,
    pub anomalies: usize,
}

/// Writes the synthetic sample CSV to `out` and its ground truth to `truth_out`.
pub fn gen_data(cfg: &RunConfig, out: &Path, truth_out: &Path) -> Result<GenDataReport> {
    let plan = if cfg.anomalies.is_empty() {
        datagen::default_anomaly_plan(&cfg.trace, cfg.train.train_fraction, cfg.anomalies_per_kind)?
    } else {
        cfg.anomalies.clone()
    };
    let trace = datagen::inject_anomalies(datagen::generate_trace(&cfg.trace)?, &plan, &cfg.trace)?;
    write(out, &diol_core::signal::write_sample_csv(&trace.samples))?;
    write(truth_out, &datagen::write_truth_json(&trace.truth))?;
    Ok(GenDataReport {
        samples: trace.samples.len(),
        anomalies: trace.truth.len(),
    })
}

/// Full device-A pipeline: features, training, model export, then scoring
/// of the whole trace for the summary.
pub fn train(samples: &Path, cfg: &RunConfig, model_out: &Path, features_out: Option<&Path>) -> Result<RunSummary> {
    let mut stages = Stages::default();
    let features = load_features(samples, cfg, &mut stages)?;
    if let Some(path) = features_out {
        write(path, &write_feature_csv(&features))?;
    }
    let model = stages.run("train", || Ok(kmeans::train(&features, &cfg.train)?))?;
    stages.run("export", || {
        diol::save_model(model_out, &model).with_context(|| model_out.display().to_string())
    })?;
    let verdicts = stages.run("infer", || Ok(kmeans::infer(&features, &model)?))?;
    Ok(stages.summary(&verdicts))
}

/// Scores a trace with a saved K-Means model or an in-line Z-Score baseline
/// and writes the verdict CSV to `out`.
pub fn infer(
    samples: &Path,
    cfg: &RunConfig,
    detector: Detector,
    model: Option<&Path>,
    out: &Path,
    features_out: Option<&Path>,
) -> Result<RunSummary> {
    let mut stages = Stages::default();
    // reject a bad model before doing any signal work
    let model = match (detector, model) {
        (Detector::KMeans, Some(path)) => Some(stages.run("parse", || {
            diol::load_model(path).with_context(|| path.display().to_string())
        })?),
        (Detector::KMeans, None) => bail!("the kmeans detector needs --model"),
        (Detector::ZScore, _) => None,
    };
    let features = load_features(samples, cfg, &mut stages)?;
    if let Some(path) = features_out {
        write(path, &write_feature_csv(&features))?;
    }
    let verdicts = match model {
        Some(model) => stages.run("infer", || Ok(kmeans::infer(&features, &model)?))?,
        None => {
            let z = stages.run("train", || {
                Ok(train_zscore(&features, cfg.train.train_fraction, cfg.z_threshold)?)
            })?;
            stages.run("infer", || Ok(infer_zscore(&features, &z)?))?
        }
    };
    write(out, &write_verdict_csv(&verdicts))?;
    Ok(stages.summary(&verdicts))
}

fn load_truth(path: &Path) -> Result<Vec<TruthInterval>> {
    parse_truth_json(&read(path)?).with_context(|| path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub equivalence: EquivalenceResult,
    pub device_a: RunSummary,
    pub device_b: RunSummary,
    pub metrics: Option<DetectionMetrics>,
}

fn device_summary(report: diol::DeviceReport) -> RunSummary {
    Stages(report.timing).summary(&report.verdicts)
}

/// Device A trains and exports `MODEL.TXT` into `workdir`; device B loads it
/// and scores the same features; the verdict streams are compared bitwise.
///
/// Also leaves `features.csv`, `verdicts_a.csv` and `verdicts_b.csv` in
/// `workdir` for the timeline command.
pub fn diol_demo(samples: &Path, cfg: &RunConfig, workdir: &Path, truth: Option<&Path>) -> Result<DemoReport> {
    let truth = truth.map(load_truth).transpose()?;
    let mut stages = Stages::default();
    let features = load_features(samples, cfg, &mut stages)?;
    fs::create_dir_all(workdir).with_context(|| format!("creating {}", workdir.display()))?;
    let model_path = workdir.join("MODEL.TXT");
    write(&workdir.join("features.csv"), &write_feature_csv(&features))?;

    let a = diol::run_device_a(&features, &cfg.train, &model_path).context("device A")?;
    // device B runs on its own thread with nothing but the file path
    let b = std::thread::scope(|s| {
        s.spawn(|| {
            let before = kmeans::training_runs();
            let report = diol::run_device_b(&model_path, &features);
            debug_assert_eq!(kmeans::training_runs(), before, "device B must not train");
            report
        })
        .join()
        .expect("device B thread panicked")
    })
    .context("device B")?;

    write(&workdir.join("verdicts_a.csv"), &write_verdict_csv(&a.verdicts))?;
    write(&workdir.join("verdicts_b.csv"), &write_verdict_csv(&b.verdicts))?;
    let equivalence = diol::verify_equivalence(&a, &b)?;
    let metrics = truth.map(|t| metrics::evaluate(&b.verdicts, &t));
    Ok(DemoReport {
        equivalence,
        device_a: device_summary(a),
        device_b: device_summary(b),
        metrics,
    })
}

/// Joins verdicts with features by timestamp into `timestamp_ms,rms,state,is_anomaly`.
pub fn timeline(verdicts: &Path, features: &Path, out: &Path) -> Result<usize> {
    let verdicts = kmeans::parse_verdict_csv(&read(verdicts)?).with_context(|| verdicts.display().to_string())?;
    let features = features::parse_feature_csv(&read(features)?).with_context(|| features.display().to_string())?;
    let text = timeline_csv(&verdicts, &features)?;
    write(out, &text)?;
    Ok(verdicts.len())
}

pub fn timeline_csv(verdicts: &[AnomalyVerdict], features: &[FeatureVector]) -> Result<String, Error> {
    if verdicts.len() != features.len() {
        return Err(Error::TimestampMismatch(format!(
            "{} verdicts against {} feature records",
            verdicts.len(),
            features.len()
        )));
    }
    let mut out = String::with_capacity(32 * (verdicts.len() + 1));
    out.push_str(TIMELINE_CSV_HEADER);
    out.push('\n');
    for (v, f) in verdicts.iter().zip(features) {
        if v.timestamp_ms != f.timestamp_ms {
            return Err(Error::TimestampMismatch(format!(
                "verdict at {} ms pairs with feature record at {} ms",
                v.timestamp_ms, f.timestamp_ms
            )));
        }
        let state = if f.on_duration_s > 0.0 { State::On } else { State::Off };
        out.push_str(&format!(
            "{},{},{},{}\n",
            v.timestamp_ms,
            f.rms,
            state.as_str(),
            v.is_anomaly
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub kmeans: RunSummary,
    pub zscore: RunSummary,
    /// Fraction of records on which both detectors raise the same flag.
    pub record_agreement: f64,
    pub interval_agreement: Option<IntervalAgreement>,
    pub kmeans_metrics: Option<DetectionMetrics>,
    pub zscore_metrics: Option<DetectionMetrics>,
}

/// Runs K-Means (trained on this trace, or the given model) and the Z-Score
/// baseline on the same features.
pub fn compare(samples: &Path, cfg: &RunConfig, model: Option<&Path>, truth: Option<&Path>) -> Result<CompareReport> {
    let truth = truth.map(load_truth).transpose()?;
    let mut shared = Stages::default();
    let features = load_features(samples, cfg, &mut shared)?;

    let mut ks = Stages(shared.0.clone());
    let model = match model {
        Some(path) => ks.run("parse", || {
            diol::load_model(path).with_context(|| path.display().to_string())
        })?,
        None => ks.run("train", || Ok(kmeans::train(&features, &cfg.train)?))?,
    };
    let kv = ks.run("infer", || Ok(kmeans::infer(&features, &model)?))?;

    let mut zs = Stages(shared.0);
    let z = zs.run("train", || {
        Ok(train_zscore(&features, cfg.train.train_fraction, cfg.z_threshold)?)
    })?;
    let zv = zs.run("infer", || Ok(infer_zscore(&features, &z)?))?;

    Ok(CompareReport {
        record_agreement: metrics::record_agreement(&kv, &zv),
        interval_agreement: truth.as_deref().map(|t| metrics::interval_agreement(&kv, &zv, t)),
        kmeans_metrics: truth.as_deref().map(|t| metrics::evaluate(&kv, t)),
        zscore_metrics: truth.as_deref().map(|t| metrics::evaluate(&zv, t)),
        kmeans: ks.summary(&kv),
        zscore: zs.summary(&zv),
    })
}

/// `path` with its extension replaced by `truth.json`.
pub fn default_truth_path(samples_out: &Path) -> PathBuf {
    samples_out.with_extension("truth.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(t: i64, rms: f64, on: f64) -> FeatureVector {
        FeatureVector::from_values(t, [rms, rms, 0.0, 0.0, on])
    }

    fn v(t: i64, flag: bool) -> AnomalyVerdict {
        AnomalyVerdict {
            timestamp_ms: t,
            cluster: 1,
            distance: 0.5,
            is_anomaly: flag,
        }
    }

    #[test]
    fn timeline_joins_by_timestamp() {
        let f = [fv(999, 0.01, 0.0), fv(1999, 0.85, 1.0)];
        let text = timeline_csv(&[v(999, false), v(1999, true)], &f).unwrap();
        assert_eq!(
            text,
            "timestamp_ms,rms,state,is_anomaly\n999,0.01,OFF,false\n1999,0.85,ON,true\n"
        );
        assert!(matches!(
            timeline_csv(&[v(5, false), v(1999, true)], &f),
            Err(Error::TimestampMismatch(_))
        ));
        assert!(timeline_csv(&[v(999, false)], &f).is_err());
    }

    #[test]
    fn truth_path_sits_next_to_samples() {
        assert_eq!(
            default_truth_path(Path::new("out/trace.csv")),
            Path::new("out/trace.truth.json")
        );
    }
}
