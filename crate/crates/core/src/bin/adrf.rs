//! Command-line front end: data generation, training, calibration,
//! streaming inference, evaluation and reporting.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adrf_core::pipeline::{self, Config, PipelineError, Scale};

#[derive(Parser)]
#[command(
    name = "adrf",
    version,
    about = "Reconstruction- and forecasting-based anomaly detection for IMU and camera streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Optional config file overriding the scale defaults ([section] key = value)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for generation, splits and weight initialization
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Built-in defaults: desk (32×32, short trainings) or paper (128×128, full recipe)
    #[arg(long, default_value = "desk")]
    scale: Scale,
}

impl CommonOpts {
    fn config(&self) -> Result<Config, PipelineError> {
        let mut cfg = Config::defaults(self.scale);
        if let Some(path) = &self.config {
            cfg = cfg.merged_with(&Config::load(path)?);
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (IMU streams + frame streams + labels)
    Datagen {
        #[command(flatten)]
        common: CommonOpts,
        /// Corpus output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the IMU autoencoder and forecaster on the corpus train split
    TrainImu {
        #[command(flatten)]
        common: CommonOpts,
        /// Corpus directory (from datagen)
        #[arg(long)]
        data: PathBuf,
        /// Model output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the vision codec, forecaster and adversarial fine-tuning
    TrainVision {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit error distributions on held-out normal data and derive thresholds
    Calibrate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        data: PathBuf,
        /// Directory holding the trained checkpoints
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stream the test scenarios through the detectors, emitting flag events
    Infer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// thresholds.txt from calibrate
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Join events with ground truth into precision/recall/F1 reports
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Events directory (from infer)
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the combined report from eval and calibration artifacts
    Report {
        /// Eval output directory
        #[arg(long)]
        eval: PathBuf,
        /// Calibration output directory
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline (datagen → train → calibrate → infer → eval)
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Root directory for all stage outputs
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Datagen { common, out } => {
            let split = pipeline::stage_datagen(&common.config()?, common.seed, &out)?;
            println!(
                "corpus written to {} (train: {}, threshold: {}, test: {})",
                out.display(),
                split.train.len(),
                split.threshold.len(),
                split.test.len()
            );
        }
        Command::TrainImu { common, data, out } => {
            pipeline::stage_train_imu(&data, &common.config()?, common.seed, &out)?;
            println!("IMU checkpoints written to {}", out.display());
        }
        Command::TrainVision { common, data, out } => {
            pipeline::stage_train_vision(&data, &common.config()?, common.seed, &out)?;
            println!("vision checkpoints written to {}", out.display());
        }
        Command::Calibrate {
            common,
            data,
            models,
            out,
        } => {
            let set = pipeline::stage_calibrate(&data, &models, &common.config()?, &out)?;
            print!("{}", set.to_kv());
            println!(
                "thresholds written to {}",
                out.join("thresholds.txt").display()
            );
        }
        Command::Infer {
            data,
            models,
            thresholds,
            out,
        } => {
            pipeline::stage_infer(&data, &models, &thresholds, &out)?;
            println!("events written to {}", out.display());
        }
        Command::Eval {
            data,
            models,
            events,
            out,
        } => {
            let report = pipeline::stage_eval(&data, &models, &events, &out)?;
            print!("{}", report.render_table());
        }
        Command::Report {
            eval,
            calibration,
            out,
        } => {
            let text = pipeline::stage_report(&eval, &calibration, &out)?;
            print!("{text}");
        }
        Command::Run { common, out } => {
            let cfg = common.config()?;
            let report = pipeline::run_full_pipeline(&cfg, common.seed, &out)?;
            print!("{}", report.render_table());
        }
    }
    Ok(())
}
