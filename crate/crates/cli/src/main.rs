use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use diol_cli::commands::{self, default_truth_path};
use diol_cli::{Detector, RunConfig};

/// Power-signal anomaly detection with a shareable K-Means model.
///
/// Summaries go to stdout as single-line JSON; logs go to stderr
/// (set RUST_LOG=debug for more). Exit status: 0 success, 1 pipeline
/// error, 2 usage error.
#[derive(Debug, Parser)]
#[command(name = "diol", version)]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Replace the trace seed from the configuration
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DetectorArg {
    Kmeans,
    Zscore,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic sample CSV and its ground-truth JSON
    GenData {
        /// Sample CSV to write
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth JSON to write [default: <out>.truth.json]
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Train a K-Means model on a sample CSV and export it
    Train {
        samples: PathBuf,
        /// Model file to write
        #[arg(long, default_value = "MODEL.TXT")]
        model: PathBuf,
        /// Also write the feature CSV here
        #[arg(long)]
        features_out: Option<PathBuf>,
    },
    /// Score a sample CSV and write a verdict CSV
    Infer {
        samples: PathBuf,
        /// Model file (kmeans detector)
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "kmeans")]
        detector: DetectorArg,
        /// Verdict CSV to write
        #[arg(long)]
        out: PathBuf,
        /// Also write the feature CSV here
        #[arg(long)]
        features_out: Option<PathBuf>,
    },
    /// Train on device A, share MODEL.TXT, infer on device B, compare
    DiolDemo {
        samples: PathBuf,
        /// Working directory for MODEL.TXT and the CSV artifacts
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth JSON; adds recall and false-positive metrics
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Join verdicts and features into a plot-ready timeline CSV
    Timeline {
        verdicts: PathBuf,
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run K-Means and the Z-Score baseline on the same trace
    Compare {
        samples: PathBuf,
        /// Use this model instead of training on the trace
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("reports always serialize"));
}

fn load_config(path: Option<&Path>, seed_override: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed_override {
        cfg.trace.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(cli.config.as_deref(), cli.seed_override)?;
    match cli.command {
        Command::GenData { out, truth } => {
            let truth = truth.unwrap_or_else(|| default_truth_path(&out));
            let report = commands::gen_data(&cfg, &out, &truth)?;
            log::info!("wrote {} and {}", out.display(), truth.display());
            print_json(&report);
        }
        Command::Train {
            samples,
            model,
            features_out,
        } => {
            let summary = commands::train(&samples, &cfg, &model, features_out.as_deref())?;
            log::info!("wrote {}", model.display());
            print_json(&summary);
        }
        Command::Infer {
            samples,
            model,
            detector,
            out,
            features_out,
        } => {
            let detector = match detector {
                DetectorArg::Kmeans => Detector::KMeans,
                DetectorArg::Zscore => Detector::ZScore,
            };
            let summary = commands::infer(
                &samples,
                &cfg,
                detector,
                model.as_deref(),
                &out,
                features_out.as_deref(),
            )?;
            print_json(&summary);
        }
        Command::DiolDemo { samples, out, truth } => {
            let report = commands::diol_demo(&samples, &cfg, &out, truth.as_deref())?;
            log::info!(
                "device A: {} anomalies, device B: {} anomalies",
                report.device_a.anomalies_flagged,
                report.device_b.anomalies_flagged
            );
            print_json(&report.equivalence);
            if let Some(metrics) = &report.metrics {
                print_json(metrics);
            }
            if !report.equivalence.identical {
                log::error!("device B verdicts diverge from device A");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Timeline {
            verdicts,
            features,
            out,
        } => {
            let rows = commands::timeline(&verdicts, &features, &out)?;
            log::info!("wrote {rows} timeline rows to {}", out.display());
        }
        Command::Compare { samples, model, truth } => {
            let report = commands::compare(&samples, &cfg, model.as_deref(), truth.as_deref())?;
            print_json(&report);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
