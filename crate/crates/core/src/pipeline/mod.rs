//! End-to-end orchestration: checkpoints, configuration, streaming flag
//! events, evaluation reports, and the stage drivers behind the CLI.

pub mod checkpoint;
pub mod config;
pub mod events;
pub mod eval;
pub mod stages;

pub use checkpoint::{assign_params, load_checkpoint, save_checkpoint, ModelKind, RawCheckpoint};
pub use config::{Config, Scale};
pub use events::{
    read_events_jsonl, write_events_jsonl, ChannelFlag, DetectorSource, FlagEvent,
    StreamingImuEvaluator, StreamingVisionEvaluator,
};
pub use eval::{
    confusion_for_stream, detector_report, ConfusionCounts, DetectorReport, EvalReport,
    MacroMetrics, ScenarioMetrics,
};
pub use stages::{
    calibration_error_streams, load_imu_autoencoder, load_imu_forecaster, load_sequence,
    load_vision_codec, load_vision_forecaster, read_vision_split, run_full_pipeline,
    stage_calibrate, stage_datagen, stage_eval, stage_infer, stage_report, stage_train_imu,
    stage_train_vision, RunPaths, VisionSplitRow,
};

use crate::data::DataError;
use crate::imu::ImuModelError;
use crate::stats::StatsError;
use crate::tensor::TensorError;
use crate::vision::VisionError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint magic: {found:?}")]
    BadMagic { found: Vec<u8> },
    #[error("checkpoint version {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint truncated while reading {context}")]
    TruncatedCheckpoint { context: String },
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error("missing config key: {0}")]
    MissingConfigKey(String),
    #[error("malformed config: {0}")]
    MalformedConfig(String),
    #[error("malformed events: {0}")]
    MalformedEvents(String),
    #[error("no ground-truth label for stream {stream} at t = {t}")]
    LabelMismatch { stream: String, t: f64 },
    #[error(transparent)]
    Imu(#[from] ImuModelError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
}
