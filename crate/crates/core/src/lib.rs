//! Appliance power-signal anomaly detection with portable K-Means models.
//!
//! The pipeline runs in stages:
//!
//! ```text
//! sample CSV -> cleanse -> RMS windows -> state labels + features
//!            -> K-Means training (Device A) -> MODEL.TXT
//!            -> parse + inference (Device B)  -> verdicts
//! ```
//!
//! Every stage is a pure function of its inputs, so a model trained on one
//! "device" and loaded on another from its serialized text reproduces the
//! original verdicts bit for bit.

pub mod datagen;
pub mod diol;
pub mod error;
pub mod features;
pub mod kmeans;
pub mod model_format;
pub mod signal;
pub mod zscore;

pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureVector, State, StateLabel};
pub use kmeans::{AnomalyVerdict, KMeansModel, NormStats, TrainConfig};
pub use model_format::{ModelDocument, ParseError, ParseErrorKind};
pub use signal::{CurrentSample, RmsRecord, SignalConfig};
