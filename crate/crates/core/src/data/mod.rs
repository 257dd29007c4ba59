//! Synthetic scenario generation, preprocessing (scaling, windowing),
//! dataset splits, and the ground-truth labeling rule.

pub mod generate;
pub mod io;

pub use generate::{generate_scenario, 
    generate_frame_scenario, generate_imu_scenario, FrameAnomalySpec, ImuAnomalySpec,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::imu::{ImuModelError, ImuSample, ImuWindow, FEATURES, WINDOW};
use crate::vision::{flip_h, Frame, FrameSequence, VisionError};

/// Windows spanning a timestamp gap larger than this multiple of the nominal
/// period are discarded rather than interpolated.
pub const GAP_FACTOR: f64 = 1.5;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("feature {0} is constant; cannot fit scaler")]
    ConstantFeature(usize),
    #[error("stream of {got} samples is too short (need ≥ {need})")]
    StreamTooShort { need: usize, got: usize },
    #[error("empty normal reference for labeling")]
    EmptyReference,
    #[error("invalid anomaly spec: {0}")]
    InvalidAnomalySpec(String),
    #[error("sequence pool of {pool} cannot fill threshold {threshold} + test {test}")]
    PoolTooSmall {
        pool: usize,
        threshold: usize,
        test: usize,
    },
    #[error("bad image data: {0}")]
    BadImage(String),
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Imu(#[from] ImuModelError),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ScenarioKind {
    Normal,
    Abnormal,
}

/// One recorded scenario: an IMU stream and a frame stream, sampled at
/// independent fixed rates (the two streams are not synchronized), with
/// per-element ground-truth labels.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: String,
    pub kind: ScenarioKind,
    pub imu: Vec<ImuSample>,
    pub imu_labels: Vec<bool>,
    pub frames: Vec<Frame>,
    pub frame_labels: Vec<bool>,
}

impl Scenario {
    pub fn mirrored(&self) -> Scenario {
        Scenario {
            id: format!("{}-mirror", self.id),
            kind: self.kind,
            imu: self.imu.clone(),
            imu_labels: self.imu_labels.clone(),
            frames: self.frames.iter().map(flip_h).collect(),
            frame_labels: self.frame_labels.clone(),
        }
    }
}

// ── scaling ───────────────────────────────────────────────────────────────

/// Per-feature min/max from training normals; maps each feature to [−1, 1]
/// affinely. Out-of-range test values are preserved, not clamped.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalerParams {
    pub min: [f64; FEATURES],
    pub max: [f64; FEATURES],
}

pub fn fit_scaler(samples: &[ImuSample]) -> Result<ScalerParams> {
    if samples.len() < 2 {
        return Err(DataError::StreamTooShort {
            need: 2,
            got: samples.len(),
        });
    }
    let mut min = [f64::INFINITY; FEATURES];
    let mut max = [f64::NEG_INFINITY; FEATURES];
    for s in samples {
        for (d, v) in s.features().iter().enumerate() {
            min[d] = min[d].min(*v);
            max[d] = max[d].max(*v);
        }
    }
    for d in 0..FEATURES {
        if max[d] <= min[d] {
            return Err(DataError::ConstantFeature(d));
        }
    }
    Ok(ScalerParams { min, max })
}

impl ScalerParams {
    pub fn apply(&self, s: &ImuSample) -> ImuSample {
        let f = s.features();
        let mut out = [0.0; FEATURES];
        for d in 0..FEATURES {
            out[d] = 2.0 * (f[d] - self.min[d]) / (self.max[d] - self.min[d]) - 1.0;
        }
        ImuSample::from_features(s.t, out)
    }

    pub fn invert(&self, s: &ImuSample) -> ImuSample {
        let f = s.features();
        let mut out = [0.0; FEATURES];
        for d in 0..FEATURES {
            out[d] = (f[d] + 1.0) / 2.0 * (self.max[d] - self.min[d]) + self.min[d];
        }
        ImuSample::from_features(s.t, out)
    }

    pub fn apply_all(&self, samples: &[ImuSample]) -> Vec<ImuSample> {
        samples.iter().map(|s| self.apply(s)).collect()
    }
}

// ── windowing ─────────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowMode {
    Reconstruction,
    Forecast,
}

/// Median timestamp difference; the stream's nominal period.
pub fn nominal_period(samples: &[ImuSample]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let mut diffs: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    diffs.sort_by(f64::total_cmp);
    Some(diffs[diffs.len() / 2])
}

/// Sliding windows over the stream: N−2 reconstruction windows or N−3
/// forecast windows (with the 4th sample as target). Windows spanning a
/// timestamp gap are dropped.
pub fn make_windows(stream: &[ImuSample], mode: WindowMode) -> Result<Vec<ImuWindow>> {
    let need = match mode {
        WindowMode::Reconstruction => WINDOW,
        WindowMode::Forecast => WINDOW + 1,
    };
    if stream.len() < need {
        return Err(DataError::StreamTooShort {
            need,
            got: stream.len(),
        });
    }
    let period = nominal_period(stream).expect("len ≥ 2 checked");
    let max_gap = GAP_FACTOR * period;
    let span = need;
    let mut out = Vec::with_capacity(stream.len() + 1 - span);
    'outer: for i in 0..=(stream.len() - span) {
        let chunk = &stream[i..i + span];
        for w in chunk.windows(2) {
            if w[1].t - w[0].t > max_gap {
                continue 'outer;
            }
        }
        let samples = [chunk[0], chunk[1], chunk[2]];
        let target = match mode {
            WindowMode::Reconstruction => None,
            WindowMode::Forecast => Some(chunk[3]),
        };
        out.push(ImuWindow::new(samples, target)?);
    }
    Ok(out)
}

// ── ground-truth labeling ─────────────────────────────────────────────────

/// Per-axis [min, max] envelopes taken from normal reference streams; a
/// timestamp is abnormal iff any of the 6 channels exits its envelope.
pub fn label_ground_truth(
    stream: &[ImuSample],
    reference: &[&[ImuSample]],
) -> Result<Vec<bool>> {
    if reference.iter().all(|r| r.is_empty()) {
        return Err(DataError::EmptyReference);
    }
    let mut min = [f64::INFINITY; FEATURES];
    let mut max = [f64::NEG_INFINITY; FEATURES];
    for r in reference {
        for s in *r {
            for (d, v) in s.features().iter().enumerate() {
                min[d] = min[d].min(*v);
                max[d] = max[d].max(*v);
            }
        }
    }
    Ok(stream
        .iter()
        .map(|s| {
            s.features()
                .iter()
                .enumerate()
                .any(|(d, &v)| v < min[d] || v > max[d])
        })
        .collect())
}

// ── frame dataset construction ────────────────────────────────────────────

/// A 4-frame sequence with its scenario provenance and label (true =
/// abnormal). The label is the OR over the sequence's four frame labels, so
/// windows whose context contains an anomalous transition count as abnormal.
#[derive(Clone, Debug)]
pub struct LabeledSequence {
    pub seq: FrameSequence,
    pub label: bool,
    pub scenario: String,
    pub end_index: usize,
}

#[derive(Clone, Debug, Default)]
pub struct FrameDatasetSplit {
    pub train: Vec<LabeledSequence>,
    pub threshold: Vec<LabeledSequence>,
    pub test: Vec<LabeledSequence>,
}

fn scenario_sequences(sc: &Scenario) -> Result<Vec<LabeledSequence>> {
    let mut out = Vec::new();
    if sc.frames.len() < 4 {
        return Ok(out);
    }
    for end in 3..sc.frames.len() {
        let seq = FrameSequence::new(
            [
                sc.frames[end - 3].clone(),
                sc.frames[end - 2].clone(),
                sc.frames[end - 1].clone(),
            ],
            sc.frames[end].clone(),
        )?;
        let label = sc.frame_labels[end - 3..=end].iter().any(|&l| l);
        out.push(LabeledSequence {
            seq,
            label,
            scenario: sc.id.clone(),
            end_index: end,
        });
    }
    Ok(out)
}

/// Mirrors the normal scenarios, pools their 4-frame sliding sequences,
/// draws the threshold and test subsets by seeded shuffle, and appends every
/// abnormal-scenario sequence to the test set.
pub fn build_frame_dataset(
    scenarios: &[Scenario],
    seed: u64,
    threshold_size: usize,
    test_size: usize,
) -> Result<FrameDatasetSplit> {
    let mut pool: Vec<LabeledSequence> = Vec::new();
    let mut abnormal: Vec<LabeledSequence> = Vec::new();
    for sc in scenarios {
        match sc.kind {
            ScenarioKind::Normal => {
                pool.extend(scenario_sequences(sc)?);
                pool.extend(scenario_sequences(&sc.mirrored())?);
            }
            ScenarioKind::Abnormal => abnormal.extend(scenario_sequences(sc)?),
        }
    }
    if pool.len() < threshold_size + test_size {
        return Err(DataError::PoolTooSmall {
            pool: pool.len(),
            threshold: threshold_size,
            test: test_size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let threshold: Vec<LabeledSequence> = pool.drain(..threshold_size).collect();
    let mut test: Vec<LabeledSequence> = pool.drain(..test_size).collect();
    test.extend(abnormal);
    Ok(FrameDatasetSplit {
        train: pool,
        threshold,
        test,
    })
}

// ── split manifest ────────────────────────────────────────────────────────

/// Scenario ids per role. Threshold data never trains; the roles are
/// disjoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub threshold: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for id in self
            .train
            .iter()
            .chain(&self.threshold)
            .chain(&self.test)
        {
            if !seen.insert(id.clone()) {
                return Err(DataError::BadManifest(format!(
                    "scenario {id} assigned to more than one role"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t: f64, v: f64) -> ImuSample {
        ImuSample::from_features(t, [v, v + 1.0, v + 2.0, v + 3.0, v + 4.0, v + 5.0])
    }

    fn ramp_stream(n: usize, dt: f64) -> Vec<ImuSample> {
        (0..n).map(|i| s(i as f64 * dt, i as f64 * 0.01)).collect()
    }

    #[test]
    fn window_counts_follow_n_minus_2_and_3() {
        for n in [4usize, 10, 302, 551] {
            let stream = ramp_stream(n, 0.1);
            let rec = make_windows(&stream, WindowMode::Reconstruction).unwrap();
            let fc = make_windows(&stream, WindowMode::Forecast).unwrap();
            assert_eq!(rec.len(), n - 2, "reconstruction windows for n = {n}");
            assert_eq!(fc.len(), n - 3, "forecast windows for n = {n}");
        }
        // the recipe's stated counts: 551 → 549/548, 302 → 299/298
        let stream = ramp_stream(551, 0.1);
        assert_eq!(
            make_windows(&stream, WindowMode::Reconstruction).unwrap().len(),
            549
        );
        assert_eq!(make_windows(&stream, WindowMode::Forecast).unwrap().len(), 548);
    }

    #[test]
    fn n_equals_4_gives_2_and_1() {
        let stream = ramp_stream(4, 0.1);
        assert_eq!(
            make_windows(&stream, WindowMode::Reconstruction).unwrap().len(),
            2
        );
        assert_eq!(make_windows(&stream, WindowMode::Forecast).unwrap().len(), 1);
    }

    #[test]
    fn short_stream_is_an_error() {
        let stream = ramp_stream(2, 0.1);
        assert!(matches!(
            make_windows(&stream, WindowMode::Reconstruction),
            Err(DataError::StreamTooShort { .. })
        ));
    }

    #[test]
    fn windows_spanning_gaps_are_dropped() {
        let mut stream = ramp_stream(10, 0.1);
        // introduce a 3-period gap between samples 4 and 5
        for smp in &mut stream[5..] {
            smp.t += 0.3;
        }
        let rec = make_windows(&stream, WindowMode::Reconstruction).unwrap();
        // windows starting at 3 and 4 span the gap
        assert_eq!(rec.len(), 8 - 2);
        assert!(rec.iter().all(|w| {
            w.samples.windows(2).all(|p| p[1].t - p[0].t < 0.15)
        }));
    }

    #[test]
    fn scaler_formula_and_out_of_range_behaviour() {
        // feature 0 spans [−2, 2]: value 0 → 0, value 2 → 1, value 4 → 2
        let samples = vec![s(0.0, -2.0), s(1.0, 2.0)];
        let p = fit_scaler(&samples).unwrap();
        let mid = p.apply(&s(2.0, 0.0));
        assert!((mid.features()[0] - 0.0).abs() < 1e-12);
        let hi = p.apply(&s(3.0, 2.0));
        assert!((hi.features()[0] - 1.0).abs() < 1e-12);
        let over = p.apply(&s(4.0, 4.0));
        assert!((over.features()[0] - 2.0).abs() < 1e-12, "not clamped");
    }

    #[test]
    fn scaler_roundtrip_is_affine_exact() {
        let samples = ramp_stream(50, 0.1);
        let p = fit_scaler(&samples).unwrap();
        for smp in &samples {
            let back = p.invert(&p.apply(smp));
            for (a, b) in back.features().iter().zip(smp.features()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaler_rejects_constant_feature() {
        let samples = vec![s(0.0, 1.0), s(1.0, 1.0)];
        assert!(matches!(
            fit_scaler(&samples),
            Err(DataError::ConstantFeature(_))
        ));
    }

    #[test]
    fn envelope_labeler_flags_out_of_range_channels() {
        let reference = ramp_stream(100, 0.1);
        // all channels within the envelopes → normal
        let labels = label_ground_truth(&reference, &[&reference]).unwrap();
        assert!(labels.iter().all(|&l| !l));
        // push one channel outside
        let mut anomaly = s(200.0, 0.5);
        anomaly.angular[0] = 99.0;
        let labels = label_ground_truth(&[anomaly], &[&reference]).unwrap();
        assert!(labels[0]);
        assert!(matches!(
            label_ground_truth(&reference, &[&[]]),
            Err(DataError::EmptyReference)
        ));
    }

    #[test]
    fn mirror_is_involution_and_preserves_labels() {
        let f: Vec<Frame> = (0..4)
            .map(|i| {
                let data: Vec<f64> = (0..16).map(|j| ((i * 16 + j) as f64 / 64.0) - 0.5).collect();
                Frame::new(data, 4, i as f64).unwrap()
            })
            .collect();
        let sc = Scenario {
            id: "n".into(),
            kind: ScenarioKind::Normal,
            imu: vec![],
            imu_labels: vec![],
            frames: f,
            frame_labels: vec![false, true, false, false],
        };
        let m = sc.mirrored();
        assert_eq!(m.frame_labels, sc.frame_labels);
        let mm = m.mirrored();
        for (a, b) in mm.frames.iter().zip(&sc.frames) {
            assert_eq!(a.data, b.data);
        }
    }

    fn blank_scenario(id: &str, kind: ScenarioKind, frames: usize) -> Scenario {
        let f: Vec<Frame> = (0..frames)
            .map(|i| Frame::new(vec![0.0; 16], 4, i as f64).unwrap())
            .collect();
        Scenario {
            id: id.into(),
            kind,
            imu: vec![],
            imu_labels: vec![],
            frame_labels: vec![false; frames],
            frames: f,
        }
    }

    #[test]
    fn paper_scale_split_counts() {
        // 6 normal scenarios whose mirrored pool yields 810 sequences:
        // scenario_sequences gives frames−3 each, ×2 for mirrors.
        // 810 = 2 × 6 × (frames − 3) → frames = 70.5; use mixed lengths
        // instead: 3 scenarios of 71 frames and 3 of 70 give
        // 2×(3×68 + 3×67) = 810.
        let mut scenarios: Vec<Scenario> = (0..3)
            .map(|i| blank_scenario(&format!("normal-{i}"), ScenarioKind::Normal, 71))
            .collect();
        scenarios.extend(
            (3..6).map(|i| blank_scenario(&format!("normal-{i}"), ScenarioKind::Normal, 70)),
        );
        // abnormal scenarios contributing 196 test sequences: 4×(52−3) = 196
        scenarios.extend(
            (0..4).map(|i| blank_scenario(&format!("abnormal-{i}"), ScenarioKind::Abnormal, 52)),
        );
        let split = build_frame_dataset(&scenarios, 7, 100, 100).unwrap();
        assert_eq!(
            split.train.len() + split.threshold.len() + split.test.len(),
            810 + 196
        );
        assert_eq!(split.train.len(), 610);
        assert_eq!(split.threshold.len(), 100);
        assert_eq!(split.test.len(), 100 + 196);
    }

    #[test]
    fn splits_are_disjoint_and_reproducible() {
        let scenarios: Vec<Scenario> = (0..2)
            .map(|i| blank_scenario(&format!("normal-{i}"), ScenarioKind::Normal, 30))
            .collect();
        let a = build_frame_dataset(&scenarios, 9, 20, 20).unwrap();
        let b = build_frame_dataset(&scenarios, 9, 20, 20).unwrap();
        let key =
            |s: &LabeledSequence| (s.scenario.clone(), s.end_index);
        let ka: Vec<_> = a.train.iter().map(key).collect();
        let kb: Vec<_> = b.train.iter().map(key).collect();
        assert_eq!(ka, kb, "seeded split not reproducible");
        let mut all: Vec<_> = a.train.iter().map(key).collect();
        all.extend(a.threshold.iter().map(key));
        all.extend(a.test.iter().map(key));
        let unique: std::collections::BTreeSet<_> = all.iter().cloned().collect();
        assert_eq!(unique.len(), all.len(), "splits overlap");
    }

    #[test]
    fn pool_too_small_is_an_error() {
        let scenarios = vec![blank_scenario("normal-0", ScenarioKind::Normal, 10)];
        assert!(matches!(
            build_frame_dataset(&scenarios, 1, 100, 100),
            Err(DataError::PoolTooSmall { .. })
        ));
    }

    #[test]
    fn manifest_rejects_overlapping_roles() {
        let split = DatasetSplit {
            train: vec!["a".into()],
            threshold: vec!["a".into()],
            test: vec![],
        };
        assert!(split.validate().is_err());
    }
}
