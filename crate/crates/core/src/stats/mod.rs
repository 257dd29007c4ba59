//! Distribution fitting, goodness-of-fit selection and right-tail threshold
//! calibration for detector error streams.

mod family;
mod fit;
mod neldermead;
pub mod special;

pub use family::{adaptive_simpson, DistributionFamily, FamilyKind};
pub use fit::{
    calibrate_thresholds, fit_family, ks_statistic, select_best_fit, ChannelCalibration,
    ErrorDistributionModel, ErrorStreams, ThresholdSet, MIN_FIT_SAMPLES,
};
pub use neldermead::{MinimizeResult, NelderMead};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("samples contain non-finite values")]
    NonFiniteSamples,
    #[error("degenerate samples: zero variance")]
    DegenerateSamples,
    #[error("parameters violate family constraints: {0}")]
    InvalidParams(String),
    #[error("fit of {family} did not converge: {detail}")]
    NonConvergence {
        family: &'static str,
        detail: String,
    },
    #[error("every candidate family failed to fit: {0}")]
    AllCandidatesFailed(String),
    #[error("quantile probability {0} outside (0, 1)")]
    InvalidQuantileProb(f64),
    #[error("quantile target {0} outside the bracketable CDF range")]
    QuantileBracket(f64),
    #[error("no candidate families given")]
    NoCandidates,
    #[error("malformed thresholds document: {0}")]
    BadThresholdFile(String),
}
