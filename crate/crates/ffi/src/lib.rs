//! C ABI over the anomaly detectors: opaque streaming-detector handles fed
//! one sample or frame at a time, returning per-detector flag decisions.
//!
//! The matching header lives at `include/adrf.h`. Every function returns an
//! [`AdrfStatus`]; on failure a thread-local message is retrievable with
//! `adrf_last_error`. Handles are not thread-safe; use one per thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use adrf_core::imu::ImuSample;
use adrf_core::pipeline::{
    load_imu_autoencoder, load_imu_forecaster, load_vision_forecaster, DetectorSource, FlagEvent,
    StreamingImuEvaluator, StreamingVisionEvaluator,
};
use adrf_core::stats::ThresholdSet;
use adrf_core::vision::Frame;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdrfStatus {
    AdrfOk = 0,
    AdrfNullArgument = 1,
    AdrfInvalidUtf8 = 2,
    AdrfIo = 3,
    AdrfBadArtifact = 4,
    AdrfBadInput = 5,
    AdrfRuntime = 6,
}

/// One IMU detector decision.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AdrfImuEvent {
    pub t: f64,
    /// 0 = autoencoder, 1 = forecaster.
    pub source: i32,
    /// 0 during warm-up (no full window yet); errors are then undefined.
    pub evaluable: u8,
    pub flagged_angular: u8,
    pub flagged_linear: u8,
    pub e_a: f64,
    pub e_l: f64,
    pub theta_a: f64,
    pub theta_l: f64,
}

/// One vision detector decision.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AdrfVisionEvent {
    pub t: f64,
    pub evaluable: u8,
    pub flagged: u8,
    pub e_v: f64,
    pub theta_v: f64,
}

pub struct AdrfImuDetector {
    evaluator: StreamingImuEvaluator,
}

pub struct AdrfVisionDetector {
    evaluator: StreamingVisionEvaluator,
    frame_size: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

/// Copies the last error message (of this thread) into `buf`, returning the
/// full message length in bytes. Always NUL-terminates when `cap > 0`.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (then only the
/// length is returned).
#[no_mangle]
pub unsafe extern "C" fn adrf_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn adrf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn cstr_path<'a>(p: *const c_char) -> Result<&'a Path, AdrfStatus> {
    if p.is_null() {
        set_error("null path argument");
        return Err(AdrfStatus::AdrfNullArgument);
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(AdrfStatus::AdrfInvalidUtf8)
        }
    }
}

fn load_thresholds(path: &Path) -> Result<ThresholdSet, AdrfStatus> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        set_error(format!("{}: {e}", path.display()));
        AdrfStatus::AdrfIo
    })?;
    ThresholdSet::from_kv(&text).map_err(|e| {
        set_error(format!("{}: {e}", path.display()));
        AdrfStatus::AdrfBadArtifact
    })
}

fn guard<F: FnOnce() -> AdrfStatus>(f: F) -> AdrfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            AdrfStatus::AdrfRuntime
        }
    }
}

/// Opens a streaming IMU detector from the two IMU checkpoints and the
/// calibrated thresholds document. `nominal_period` is the expected seconds
/// between samples (gaps beyond 1.5× restart the warm-up).
///
/// # Safety
/// Path arguments must be NUL-terminated strings; `out` must be a valid
/// pointer. The returned handle must be released with
/// `adrf_imu_detector_free`.
#[no_mangle]
pub unsafe extern "C" fn adrf_imu_detector_open(
    autoencoder_ckpt: *const c_char,
    forecaster_ckpt: *const c_char,
    thresholds_path: *const c_char,
    nominal_period: f64,
    out: *mut *mut AdrfImuDetector,
) -> AdrfStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out argument");
            return AdrfStatus::AdrfNullArgument;
        }
        let (ae_path, fc_path, th_path) = match (
            cstr_path(autoencoder_ckpt),
            cstr_path(forecaster_ckpt),
            cstr_path(thresholds_path),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        if !(nominal_period.is_finite() && nominal_period > 0.0) {
            set_error("nominal_period must be positive");
            return AdrfStatus::AdrfBadInput;
        }
        let (autoencoder, scaler) = match load_imu_autoencoder(ae_path) {
            Ok(v) => v,
            Err(e) => {
                set_error(format!("{}: {e}", ae_path.display()));
                return AdrfStatus::AdrfBadArtifact;
            }
        };
        let (forecaster, _) = match load_imu_forecaster(fc_path) {
            Ok(v) => v,
            Err(e) => {
                set_error(format!("{}: {e}", fc_path.display()));
                return AdrfStatus::AdrfBadArtifact;
            }
        };
        let thresholds = match load_thresholds(th_path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let det = Box::new(AdrfImuDetector {
            evaluator: StreamingImuEvaluator::new(
                autoencoder,
                forecaster,
                scaler,
                thresholds,
                "ffi",
                nominal_period,
            ),
        });
        *out = Box::into_raw(det);
        AdrfStatus::AdrfOk
    })
}

fn to_imu_event(e: &FlagEvent) -> AdrfImuEvent {
    let mut out = AdrfImuEvent {
        t: e.t,
        source: match e.source {
            DetectorSource::ImuAutoencoder => 0,
            DetectorSource::ImuForecaster => 1,
            DetectorSource::Vision => -1,
        },
        evaluable: e.evaluable as u8,
        ..AdrfImuEvent::default()
    };
    for c in &e.channels {
        match c.name.as_str() {
            "e_a" => {
                out.e_a = c.error;
                out.theta_a = c.threshold;
                out.flagged_angular = c.flagged as u8;
            }
            "e_l" => {
                out.e_l = c.error;
                out.theta_l = c.threshold;
                out.flagged_linear = c.flagged as u8;
            }
            _ => {}
        }
    }
    out
}

/// Pushes one raw (unscaled) IMU sample; writes exactly two events (index 0
/// autoencoder, index 1 forecaster) into `out_events`.
///
/// # Safety
/// `det` must come from `adrf_imu_detector_open`; `angular` and `linear`
/// must point to 3 doubles each; `out_events` to 2 event structs.
#[no_mangle]
pub unsafe extern "C" fn adrf_imu_detector_push(
    det: *mut AdrfImuDetector,
    t: f64,
    angular: *const f64,
    linear: *const f64,
    out_events: *mut AdrfImuEvent,
) -> AdrfStatus {
    guard(|| {
        if det.is_null() || angular.is_null() || linear.is_null() || out_events.is_null() {
            set_error("null argument");
            return AdrfStatus::AdrfNullArgument;
        }
        let ang = std::slice::from_raw_parts(angular, 3);
        let lin = std::slice::from_raw_parts(linear, 3);
        let sample = match ImuSample::new(t, [ang[0], ang[1], ang[2]], [lin[0], lin[1], lin[2]]) {
            Ok(s) => s,
            Err(e) => {
                set_error(e.to_string());
                return AdrfStatus::AdrfBadInput;
            }
        };
        match (*det).evaluator.push(&sample) {
            Ok(events) => {
                for (i, e) in events.iter().take(2).enumerate() {
                    *out_events.add(i) = to_imu_event(e);
                }
                AdrfStatus::AdrfOk
            }
            Err(e) => {
                set_error(e.to_string());
                AdrfStatus::AdrfRuntime
            }
        }
    })
}

/// Releases an IMU detector handle. Null is a no-op.
///
/// # Safety
/// `det` must come from `adrf_imu_detector_open` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adrf_imu_detector_free(det: *mut AdrfImuDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Opens a streaming vision detector from the vision forecaster checkpoint
/// and the thresholds document.
///
/// # Safety
/// As for `adrf_imu_detector_open`.
#[no_mangle]
pub unsafe extern "C" fn adrf_vision_detector_open(
    forecaster_ckpt: *const c_char,
    thresholds_path: *const c_char,
    out: *mut *mut AdrfVisionDetector,
) -> AdrfStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out argument");
            return AdrfStatus::AdrfNullArgument;
        }
        let (fc_path, th_path) = match (cstr_path(forecaster_ckpt), cstr_path(thresholds_path)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let model = match load_vision_forecaster(fc_path) {
            Ok(m) => m,
            Err(e) => {
                set_error(format!("{}: {e}", fc_path.display()));
                return AdrfStatus::AdrfBadArtifact;
            }
        };
        let thresholds = match load_thresholds(th_path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let frame_size = model.input_size();
        let det = Box::new(AdrfVisionDetector {
            evaluator: StreamingVisionEvaluator::new(model, thresholds, "ffi"),
            frame_size,
        });
        *out = Box::into_raw(det);
        AdrfStatus::AdrfOk
    })
}

/// Side length of the frames the detector expects (pixels).
///
/// # Safety
/// `det` must come from `adrf_vision_detector_open`.
#[no_mangle]
pub unsafe extern "C" fn adrf_vision_detector_frame_size(det: *const AdrfVisionDetector) -> usize {
    if det.is_null() {
        return 0;
    }
    (*det).frame_size
}

/// Pushes one grayscale frame (row-major, `frame_size²` doubles in [−1, 1])
/// and writes the detector's decision for it.
///
/// # Safety
/// `det` must come from `adrf_vision_detector_open`; `pixels` must point to
/// `len` doubles with `len == frame_size²`; `out_event` must be valid.
#[no_mangle]
pub unsafe extern "C" fn adrf_vision_detector_push(
    det: *mut AdrfVisionDetector,
    t: f64,
    pixels: *const f64,
    len: usize,
    out_event: *mut AdrfVisionEvent,
) -> AdrfStatus {
    guard(|| {
        if det.is_null() || pixels.is_null() || out_event.is_null() {
            set_error("null argument");
            return AdrfStatus::AdrfNullArgument;
        }
        let size = (*det).frame_size;
        if len != size * size {
            set_error(format!(
                "expected {} pixels ({size}×{size}), got {len}",
                size * size
            ));
            return AdrfStatus::AdrfBadInput;
        }
        let data = std::slice::from_raw_parts(pixels, len).to_vec();
        let frame = match Frame::new(data, size, t) {
            Ok(f) => f,
            Err(e) => {
                set_error(e.to_string());
                return AdrfStatus::AdrfBadInput;
            }
        };
        match (*det).evaluator.push(&frame) {
            Ok(e) => {
                let mut out = AdrfVisionEvent {
                    t: e.t,
                    evaluable: e.evaluable as u8,
                    ..AdrfVisionEvent::default()
                };
                if let Some(c) = e.channels.first() {
                    out.e_v = c.error;
                    out.theta_v = c.threshold;
                    out.flagged = c.flagged as u8;
                }
                *out_event = out;
                AdrfStatus::AdrfOk
            }
            Err(e) => {
                set_error(e.to_string());
                AdrfStatus::AdrfRuntime
            }
        }
    })
}

/// Releases a vision detector handle. Null is a no-op.
///
/// # Safety
/// `det` must come from `adrf_vision_detector_open` and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn adrf_vision_detector_free(det: *mut AdrfVisionDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}
