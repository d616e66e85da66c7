//! Command-line workflows over `diol-core`: data generation, training,
//! inference, the two-device demo, timelines and detector comparison.

pub mod commands;
pub mod config;
pub mod metrics;

pub use commands::{Detector, RunSummary};
pub use config::RunConfig;
