//! Self-supervised anomaly detection for unsynchronized IMU and camera
//! streams: reconstruction- and forecasting-based detectors, statistical
//! threshold calibration, and an end-to-end pipeline with synthetic data
//! generation.

pub mod data;
pub mod gradcheck;
pub mod imu;
pub mod nn;
pub mod pipeline;
pub mod stats;
pub mod tensor;
pub mod vision;
