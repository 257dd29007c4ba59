//! Flag events and the streaming evaluators that produce them. A step is
//! flagged iff its error strictly exceeds the applicable threshold, so every
//! event is re-checkable from its own recorded fields.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::data::{ScalerParams, GAP_FACTOR};
use crate::imu::{
    forecast_error, reconstruct_error, AutoencoderModel, ForecasterModel, ImuSample, ImuWindow,
};
use crate::stats::ThresholdSet;
use crate::vision::{frame_error, predict_frame, CnnLstmForecaster, Frame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorSource {
    ImuAutoencoder,
    ImuForecaster,
    Vision,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelFlag {
    /// "e_a", "e_l" or "e_v".
    pub name: String,
    pub error: f64,
    pub threshold: f64,
    pub flagged: bool,
}

impl ChannelFlag {
    pub fn from_error(name: &str, error: f64, threshold: f64) -> ChannelFlag {
        ChannelFlag {
            name: name.to_string(),
            error,
            threshold,
            flagged: error > threshold,
        }
    }
}

/// One decision per detector per stream element. Warm-up elements (no full
/// window yet) carry `evaluable: false` and no channels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlagEvent {
    pub stream: String,
    pub t: f64,
    pub source: DetectorSource,
    pub evaluable: bool,
    pub channels: Vec<ChannelFlag>,
}

impl FlagEvent {
    pub fn any_flagged(&self) -> bool {
        self.channels.iter().any(|c| c.flagged)
    }

    /// The flagged ⇔ error > threshold invariant, from the event's own
    /// fields.
    pub fn self_consistent(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.flagged == (c.error > c.threshold))
    }
}

pub fn write_events_jsonl(path: &std::path::Path, events: &[FlagEvent]) -> Result<(), PipelineError> {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("serializable event"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_events_jsonl(path: &std::path::Path) -> Result<Vec<FlagEvent>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| {
            PipelineError::MalformedEvents(format!("{}:{}: {e}", path.display(), idx + 1))
        })?);
    }
    Ok(out)
}

/// Streaming IMU evaluator: one event per detector per pushed sample. The
/// autoencoder needs a 3-sample window (2-sample warm-up); the forecaster
/// needs 3 past samples plus the current one as target (3-sample warm-up).
/// A timestamp gap beyond 1.5× the nominal period restarts the warm-up.
pub struct StreamingImuEvaluator {
    autoencoder: AutoencoderModel,
    forecaster: ForecasterModel,
    scaler: ScalerParams,
    thresholds: ThresholdSet,
    stream: String,
    nominal_period: f64,
    buf: VecDeque<ImuSample>,
}

impl StreamingImuEvaluator {
    pub fn new(
        autoencoder: AutoencoderModel,
        forecaster: ForecasterModel,
        scaler: ScalerParams,
        thresholds: ThresholdSet,
        stream: &str,
        nominal_period: f64,
    ) -> Self {
        StreamingImuEvaluator {
            autoencoder,
            forecaster,
            scaler,
            thresholds,
            stream: stream.to_string(),
            nominal_period,
            buf: VecDeque::with_capacity(4),
        }
    }

    pub fn push(&mut self, raw: &ImuSample) -> Result<Vec<FlagEvent>, PipelineError> {
        let scaled = self.scaler.apply(raw);
        if let Some(last) = self.buf.back() {
            if scaled.t - last.t > GAP_FACTOR * self.nominal_period {
                self.buf.clear();
            }
        }
        self.buf.push_back(scaled);
        while self.buf.len() > 4 {
            self.buf.pop_front();
        }
        let n = self.buf.len();
        let t = raw.t;
        let mut events = Vec::with_capacity(2);

        // autoencoder: window = the last 3 samples including the current one
        if n >= 3 {
            let w = ImuWindow::new([self.buf[n - 3], self.buf[n - 2], self.buf[n - 1]], None)?;
            let err = reconstruct_error(&self.autoencoder, &w)?;
            events.push(FlagEvent {
                stream: self.stream.clone(),
                t,
                source: DetectorSource::ImuAutoencoder,
                evaluable: true,
                channels: vec![
                    ChannelFlag::from_error("e_a", err.e_a, self.thresholds.autoencoder_angular.threshold),
                    ChannelFlag::from_error("e_l", err.e_l, self.thresholds.autoencoder_linear.threshold),
                ],
            });
        } else {
            events.push(self.warmup_event(t, DetectorSource::ImuAutoencoder));
        }

        // forecaster: previous 3 samples predict the current one
        if n >= 4 {
            let w = ImuWindow::new(
                [self.buf[n - 4], self.buf[n - 3], self.buf[n - 2]],
                Some(self.buf[n - 1]),
            )?;
            let err = forecast_error(&self.forecaster, &w)?;
            events.push(FlagEvent {
                stream: self.stream.clone(),
                t,
                source: DetectorSource::ImuForecaster,
                evaluable: true,
                channels: vec![
                    ChannelFlag::from_error("e_a", err.e_a, self.thresholds.forecaster_angular.threshold),
                    ChannelFlag::from_error("e_l", err.e_l, self.thresholds.forecaster_linear.threshold),
                ],
            });
        } else {
            events.push(self.warmup_event(t, DetectorSource::ImuForecaster));
        }
        Ok(events)
    }

    fn warmup_event(&self, t: f64, source: DetectorSource) -> FlagEvent {
        FlagEvent {
            stream: self.stream.clone(),
            t,
            source,
            evaluable: false,
            channels: Vec::new(),
        }
    }
}

/// Streaming vision evaluator: one event per pushed frame after a 3-frame
/// warm-up; the previous three frames predict the current one.
pub struct StreamingVisionEvaluator {
    model: CnnLstmForecaster,
    thresholds: ThresholdSet,
    stream: String,
    buf: VecDeque<Frame>,
}

impl StreamingVisionEvaluator {
    pub fn new(
        model: CnnLstmForecaster,
        thresholds: ThresholdSet,
        stream: &str,
    ) -> Self {
        StreamingVisionEvaluator {
            model,
            thresholds,
            stream: stream.to_string(),
            buf: VecDeque::with_capacity(3),
        }
    }

    pub fn push(&mut self, frame: &Frame) -> Result<FlagEvent, PipelineError> {
        let event = if self.buf.len() >= 3 {
            let inputs = [
                self.buf[self.buf.len() - 3].clone(),
                self.buf[self.buf.len() - 2].clone(),
                self.buf[self.buf.len() - 1].clone(),
            ];
            let (pred, _) = predict_frame(&self.model, &inputs)?;
            let e_v = frame_error(&pred, frame)?;
            FlagEvent {
                stream: self.stream.clone(),
                t: frame.t,
                source: DetectorSource::Vision,
                evaluable: true,
                channels: vec![ChannelFlag::from_error(
                    "e_v",
                    e_v,
                    self.thresholds.vision.threshold,
                )],
            }
        } else {
            FlagEvent {
                stream: self.stream.clone(),
                t: frame.t,
                source: DetectorSource::Vision,
                evaluable: false,
                channels: Vec::new(),
            }
        };
        self.buf.push_back(frame.clone());
        while self.buf.len() > 3 {
            self.buf.pop_front();
        }
        Ok(event)
    }
}
