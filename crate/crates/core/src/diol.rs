//! Two-device "train once, share everywhere" workflow.
//!
//! Device A trains, writes `MODEL.TXT` and scores its features. Device B
//! reads only that file, never trains, and scores the same features. The
//! devices share no memory; the file is the only channel between them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::kmeans::{self, AnomalyVerdict, KMeansModel, TrainConfig};
use crate::model_format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelSource {
    TrainedLocally,
    LoadedFromFile,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviceReport {
    pub device_id: String,
    pub verdicts: Vec<AnomalyVerdict>,
    pub model_source: ModelSource,
    /// Stage name to elapsed wall time in milliseconds.
    pub timing: BTreeMap<String, f64>,
}

impl DeviceReport {
    pub fn anomalies(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_anomaly).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceResult {
    pub identical: bool,
    pub first_divergence: Option<i64>,
    pub flag_mismatches: usize,
    pub max_distance_delta: f64,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Writes `model` to `path` in the portable text format.
pub fn save_model(path: &Path, model: &KMeansModel) -> Result<()> {
    model_format::validate(model)?;
    fs::write(path, model_format::serialize(model))?;
    Ok(())
}

/// Reads and strictly validates a model file.
pub fn load_model(path: &Path) -> Result<KMeansModel> {
    let text = fs::read_to_string(path)?;
    Ok(model_format::parse(&text)?.model)
}

pub fn run_device_a(features: &[FeatureVector], cfg: &TrainConfig, model_out: &Path) -> Result<DeviceReport> {
    let mut timing = BTreeMap::new();

    let t = Instant::now();
    let model = kmeans::train(features, cfg)?;
    timing.insert("train".to_string(), elapsed_ms(t));

    let t = Instant::now();
    save_model(model_out, &model)?;
    timing.insert("export".to_string(), elapsed_ms(t));

    let t = Instant::now();
    let verdicts = kmeans::infer(features, &model)?;
    timing.insert("infer".to_string(), elapsed_ms(t));

    Ok(DeviceReport {
        device_id: "device-a".to_string(),
        verdicts,
        model_source: ModelSource::TrainedLocally,
        timing,
    })
}

/// Loads the exported model and runs inference only.
///
/// A rejected file yields an error and no verdicts; nothing of the rejected
/// document survives the call.
pub fn run_device_b(model_in: &Path, features: &[FeatureVector]) -> Result<DeviceReport> {
    let mut timing = BTreeMap::new();

    let t = Instant::now();
    let model = load_model(model_in)?;
    timing.insert("parse".to_string(), elapsed_ms(t));

    let t = Instant::now();
    let verdicts = kmeans::infer(features, &model)?;
    timing.insert("infer".to_string(), elapsed_ms(t));

    Ok(DeviceReport {
        device_id: "device-b".to_string(),
        verdicts,
        model_source: ModelSource::LoadedFromFile,
        timing,
    })
}

/// Per-record comparison of flags and distances between two reports.
pub fn verify_equivalence(a: &DeviceReport, b: &DeviceReport) -> Result<EquivalenceResult> {
    if a.verdicts.len() != b.verdicts.len() {
        return Err(Error::TimestampMismatch(format!(
            "{} has {} records, {} has {}",
            a.device_id,
            a.verdicts.len(),
            b.device_id,
            b.verdicts.len()
        )));
    }
    let mut first_divergence = None;
    let mut flag_mismatches = 0;
    let mut max_distance_delta = 0.0f64;
    let mut bitwise_equal = true;

    for (va, vb) in a.verdicts.iter().zip(&b.verdicts) {
        if va.timestamp_ms != vb.timestamp_ms {
            return Err(Error::TimestampMismatch(format!(
                "record at {} in {} pairs with {} in {}",
                va.timestamp_ms, a.device_id, vb.timestamp_ms, b.device_id
            )));
        }
        let flag_differs = va.is_anomaly != vb.is_anomaly;
        let distance_differs = va.distance.to_bits() != vb.distance.to_bits();
        if flag_differs {
            flag_mismatches += 1;
        }
        if distance_differs {
            bitwise_equal = false;
            max_distance_delta = max_distance_delta.max((va.distance - vb.distance).abs());
        }
        if (flag_differs || distance_differs || va.cluster != vb.cluster) && first_divergence.is_none() {
            first_divergence = Some(va.timestamp_ms);
        }
    }

    Ok(EquivalenceResult {
        identical: flag_mismatches == 0 && max_distance_delta == 0.0 && bitwise_equal && first_divergence.is_none(),
        first_divergence,
        flag_mismatches,
        max_distance_delta,
    })
}
