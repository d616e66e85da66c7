//! Fixed-iteration K-Means training, anomaly scoring and threshold estimation.
//!
//! Training is a pure function of `(features, TrainConfig)`:
//!
//! 1. take the chronological prefix of `ceil(train_fraction * n)` records,
//! 2. z-score normalize it with its own population mean/std,
//! 3. seed the centroids with the first `k` normalized rows,
//! 4. run exactly `iterations` Lloyd rounds (no convergence exit),
//! 5. set the threshold to the nearest-rank `percentile` of the training
//!    distances times `scale`.
//!
//! Inference flags a record when its distance to the nearest centroid is
//! strictly greater than the threshold.

use std::cell::Cell;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT, FEATURE_NAMES};

pub const VERDICT_CSV_HEADER: &str = "timestamp_ms,cluster,distance,is_anomaly";

/// Standard deviations at or below this are replaced by 1.0.
pub const MIN_STD: f64 = 1e-12;

thread_local! {
    static TRAIN_RUNS: Cell<usize> = const { Cell::new(0) };
}

/// Number of [`train`] invocations made on the current thread.
pub fn training_runs() -> usize {
    TRAIN_RUNS.with(Cell::get)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub dim: usize,
    /// `k` rows of `dim` values in normalized feature space.
    pub centroids: Vec<Vec<f64>>,
    pub norm: NormStats,
    /// Effective decision boundary (percentile distance times `scale`).
    pub threshold: f64,
    /// Sensitivity factor already folded into `threshold`; kept for provenance.
    pub scale: f64,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub iterations: usize,
    pub train_fraction: f64,
    pub percentile: f64,
    pub scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 3,
            iterations: 3,
            train_fraction: 0.20,
            percentile: 95.0,
            scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1], got {}",
                self.train_fraction
            )));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::Config(format!(
                "percentile must be in (0, 100], got {}",
                self.percentile
            )));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config(format!(
                "scale must be a positive real, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyVerdict {
    pub timestamp_ms: i64,
    pub cluster: usize,
    pub distance: f64,
    pub is_anomaly: bool,
}

/// Length of the chronological training prefix: `ceil(fraction * n)`.
///
/// Products within 1e-9 of an integer are taken as that integer so that
/// binary rounding of `fraction` cannot add a spurious record.
pub fn training_subset_len(n: usize, fraction: f64) -> usize {
    let x = fraction * n as f64;
    let nearest = x.round();
    let len = if (x - nearest).abs() <= 1e-9 * (n as f64).max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (len as usize).min(n)
}

pub fn select_training_subset(features: &[FeatureVector], fraction: f64) -> &[FeatureVector] {
    &features[..training_subset_len(features.len(), fraction)]
}

/// Per-feature population mean and standard deviation.
pub fn compute_norm_stats(training: &[FeatureVector]) -> Result<NormStats> {
    if training.is_empty() {
        return Err(Error::EmptyInput("normalization statistics need at least one record"));
    }
    let n = training.len() as f64;
    let mut mean = vec![0.0; FEATURE_COUNT];
    for f in training {
        for (m, v) in mean.iter_mut().zip(f.values()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std = vec![0.0; FEATURE_COUNT];
    for f in training {
        for ((s, v), m) in std.iter_mut().zip(f.values()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if s.is_nan() || *s <= MIN_STD {
            *s = 1.0;
        }
    }
    Ok(NormStats { mean, std })
}

pub fn normalize(v: &FeatureVector, stats: &NormStats) -> [f64; FEATURE_COUNT] {
    let mut z = v.values();
    for ((z, m), s) in z.iter_mut().zip(&stats.mean).zip(&stats.std) {
        *z = (*z - m) / s;
    }
    z
}

pub fn denormalize(z: &[f64; FEATURE_COUNT], stats: &NormStats) -> [f64; FEATURE_COUNT] {
    let mut v = *z;
    for ((v, m), s) in v.iter_mut().zip(&stats.mean).zip(&stats.std) {
        *v = *v * s + m;
    }
    v
}

/// The first `k` rows, duplicates included.
pub fn init_centroids(scaled: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>> {
    if scaled.len() < k {
        return Err(Error::InsufficientTraining {
            got: scaled.len(),
            need: k,
        });
    }
    Ok(scaled[..k].to_vec())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn nearest_squared(z: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    assert!(!centroids.is_empty(), "assign needs at least one centroid");
    let mut best = 0;
    let mut best_sq = squared_distance(z, &centroids[0]);
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(z, c);
        if d < best_sq {
            best = i;
            best_sq = d;
        }
    }
    (best, best_sq)
}

/// Nearest centroid and its Euclidean distance; ties go to the lowest index.
pub fn assign(z: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let (best, sq) = nearest_squared(z, centroids);
    (best, sq.sqrt())
}

/// Exactly `iterations` Lloyd rounds. A cluster left empty keeps its centroid.
///
/// Scratch space (`n` assignments, `k * dim` sums, `k` counts) is allocated
/// once up front and reused across rounds.
pub fn lloyd_iterate(scaled: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, iterations: usize) -> Vec<Vec<f64>> {
    let k = centroids.len();
    if k == 0 || iterations == 0 {
        return centroids;
    }
    let dim = centroids[0].len();
    let mut labels = vec![0usize; scaled.len()];
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];

    for _ in 0..iterations {
        for (label, z) in labels.iter_mut().zip(scaled) {
            *label = assign(z, &centroids).0;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (&label, z) in labels.iter().zip(scaled) {
            counts[label] += 1;
            for (s, v) in sums[label * dim..(label + 1) * dim].iter_mut().zip(z) {
                *s += v;
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            if counts[c] == 0 {
                continue;
            }
            let n = counts[c] as f64;
            for (x, s) in centroid.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                *x = s / n;
            }
        }
    }
    centroids
}

/// Within-cluster sum of squared distances under nearest-centroid assignment.
pub fn objective(scaled: &[Vec<f64>], centroids: &[Vec<f64>]) -> f64 {
    scaled.iter().map(|z| nearest_squared(z, centroids).1).sum()
}

/// Nearest-rank percentile of `distances` times `scale`.
pub fn compute_threshold(distances: &[f64], percentile: f64, scale: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::EmptyInput("threshold needs at least one distance"));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::Config(format!(
            "percentile must be in (0, 100], got {percentile}"
        )));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((percentile * n as f64) / 100.0).ceil() as usize;
    let rank = rank.clamp(1, n);
    Ok(sorted[rank - 1] * scale)
}

fn check_finite(features: &[FeatureVector]) -> Result<()> {
    match features.iter().position(|f| !f.is_finite()) {
        Some(index) => Err(Error::NonFiniteFeature {
            index,
            timestamp_ms: features[index].timestamp_ms,
        }),
        None => Ok(()),
    }
}

pub fn train(features: &[FeatureVector], cfg: &TrainConfig) -> Result<KMeansModel> {
    TRAIN_RUNS.with(|c| c.set(c.get() + 1));
    cfg.validate()?;
    check_finite(features)?;

    let subset = select_training_subset(features, cfg.train_fraction);
    if subset.len() < cfg.k {
        return Err(Error::InsufficientTraining {
            got: subset.len(),
            need: cfg.k,
        });
    }
    let norm = compute_norm_stats(subset)?;
    let scaled: Vec<Vec<f64>> = subset.iter().map(|f| normalize(f, &norm).to_vec()).collect();
    let centroids = init_centroids(&scaled, cfg.k)?;
    let centroids = lloyd_iterate(&scaled, centroids, cfg.iterations);

    let distances: Vec<f64> = scaled.iter().map(|z| assign(z, &centroids).1).collect();
    let threshold = compute_threshold(&distances, cfg.percentile, cfg.scale)?;
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::DegenerateThreshold);
    }

    Ok(KMeansModel {
        k: cfg.k,
        dim: FEATURE_COUNT,
        centroids,
        norm,
        threshold,
        scale: cfg.scale,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
    })
}

/// Fails unless the model was built over the canonical five-feature schema.
pub fn check_schema(model: &KMeansModel) -> Result<()> {
    if model.dim != FEATURE_COUNT {
        return Err(Error::SchemaMismatch(format!(
            "model has {} features, pipeline produces {FEATURE_COUNT}",
            model.dim
        )));
    }
    if model.feature_names.iter().map(String::as_str).ne(FEATURE_NAMES) {
        return Err(Error::SchemaMismatch(format!(
            "model features {:?} differ from {:?}",
            model.feature_names, FEATURE_NAMES
        )));
    }
    Ok(())
}

pub fn infer(features: &[FeatureVector], model: &KMeansModel) -> Result<Vec<AnomalyVerdict>> {
    check_schema(model)?;
    check_finite(features)?;
    Ok(features
        .iter()
        .map(|f| {
            let z = normalize(f, &model.norm);
            let (cluster, distance) = assign(&z, &model.centroids);
            AnomalyVerdict {
                timestamp_ms: f.timestamp_ms,
                cluster,
                distance,
                is_anomaly: distance > model.threshold,
            }
        })
        .collect())
}

pub fn write_verdict_csv(verdicts: &[AnomalyVerdict]) -> String {
    let mut out = String::with_capacity(40 * (verdicts.len() + 1));
    out.push_str(VERDICT_CSV_HEADER);
    out.push('\n');
    for v in verdicts {
        let _ = writeln!(out, "{},{},{},{}", v.timestamp_ms, v.cluster, v.distance, v.is_anomaly);
    }
    out
}

/// One JSON object per line with the verdict CSV's fields.
pub fn write_verdict_jsonl(verdicts: &[AnomalyVerdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&serde_json::to_string(v).expect("verdicts always serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_verdict_csv(text: &str) -> Result<Vec<AnomalyVerdict>> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, h)| h) != Some(VERDICT_CSV_HEADER) {
        return Err(Error::Csv {
            line: 1,
            detail: format!("expected header `{VERDICT_CSV_HEADER}`"),
        });
    }
    lines
        .map(|(idx, row)| {
            let line = idx + 1;
            let bad = |what: &str| Error::Csv {
                line,
                detail: format!("bad {what} in `{row}`"),
            };
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != 4 {
                return Err(bad("field count"));
            }
            Ok(AnomalyVerdict {
                timestamp_ms: fields[0].parse().map_err(|_| bad("timestamp_ms"))?,
                cluster: fields[1].parse().map_err(|_| bad("cluster"))?,
                distance: fields[2].parse().map_err(|_| bad("distance"))?,
                is_anomaly: match fields[3] {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(bad("is_anomaly")),
                },
            })
        })
        .collect()
}
