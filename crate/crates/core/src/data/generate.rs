//! Seeded synthetic scenarios: smooth multi-sinusoid IMU streams and
//! textured moving-object frame streams, with injected instant and
//! transitional anomalies.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataError, Result, Scenario, ScenarioKind};
use crate::imu::{ImuSample, FEATURES};
use crate::vision::Frame;

pub const IMU_PERIOD: f64 = 0.1;
pub const FRAME_PERIOD: f64 = 0.2;

/// Noise standard deviation as a fraction of each channel's amplitude.
const NOISE_FRAC: f64 = 0.05;

/// Injected IMU events. Magnitudes are multiples of the channel amplitude
/// and must exceed the noise level.
#[derive(Clone, Copy, Debug)]
pub struct ImuAnomalySpec {
    pub spikes: usize,
    pub spike_magnitude: f64,
    pub steps: usize,
    pub step_magnitude: f64,
    pub step_len: usize,
    pub bursts: usize,
    pub burst_magnitude: f64,
    pub burst_len: usize,
}

impl Default for ImuAnomalySpec {
    fn default() -> Self {
        ImuAnomalySpec {
            spikes: 6,
            spike_magnitude: 8.0,
            steps: 6,
            step_magnitude: 4.0,
            step_len: 14,
            bursts: 6,
            burst_magnitude: 4.0,
            burst_len: 14,
        }
    }
}

impl ImuAnomalySpec {
    fn validate(&self) -> Result<()> {
        for (name, mag) in [
            ("spike", self.spike_magnitude),
            ("step", self.step_magnitude),
            ("burst", self.burst_magnitude),
        ] {
            if mag <= NOISE_FRAC {
                return Err(DataError::InvalidAnomalySpec(format!(
                    "{name} magnitude {mag} does not exceed the noise level {NOISE_FRAC}"
                )));
            }
        }
        Ok(())
    }
}

struct ChannelWave {
    amplitude: f64,
    offset: f64,
    components: Vec<(f64, f64, f64)>, // (amplitude, frequency, phase)
}

impl ChannelWave {
    fn sample(&self, t: f64) -> f64 {
        self.offset
            + self
                .components
                .iter()
                .map(|&(a, f, p)| a * (TAU * f * t + p).sin())
                .sum::<f64>()
    }
}

fn random_wave(rng: &mut ChaCha8Rng, base_amplitude: f64) -> ChannelWave {
    let amplitude = base_amplitude * rng.random_range(0.5..2.0);
    let n_components = rng.random_range(2..=4usize);
    let components = (0..n_components)
        .map(|_| {
            (
                amplitude * rng.random_range(0.3..1.0) / n_components as f64,
                rng.random_range(0.05..0.4),
                rng.random_range(0.0..TAU),
            )
        })
        .collect();
    ChannelWave {
        amplitude,
        offset: amplitude * rng.random_range(-0.3..0.3),
        components,
    }
}

/// Draws non-overlapping event segments of the given lengths, away from the
/// stream edges.
fn place_segments(
    rng: &mut ChaCha8Rng,
    length: usize,
    wanted: &[usize],
) -> Vec<(usize, usize)> {
    let margin = 6usize;
    let mut placed: Vec<(usize, usize)> = Vec::new();
    for &seg_len in wanted {
        for _attempt in 0..200 {
            if length <= 2 * margin + seg_len {
                break;
            }
            let start = rng.random_range(margin..length - margin - seg_len);
            let overlaps = placed
                .iter()
                .any(|&(s, l)| start < s + l + 3 && s < start + seg_len + 3);
            if !overlaps {
                placed.push((start, seg_len));
                break;
            }
        }
    }
    placed
}

/// Generates the IMU part of a scenario: per channel a sum of 2–4
/// low-frequency sinusoids plus Gaussian noise; abnormal scenarios inject
/// amplitude spikes (instant) and step offsets / high-frequency bursts
/// (transitional), labeling every affected timestamp.
pub fn generate_imu_scenario(
    id: &str,
    kind: ScenarioKind,
    length: usize,
    spec: &ImuAnomalySpec,
    seed: u64,
) -> Result<Scenario> {
    if length < 10 {
        return Err(DataError::StreamTooShort {
            need: 10,
            got: length,
        });
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [0.5, 0.8, 0.3, 2.0, 1.5, 2.5]; // rad/s ×3, m/s² ×3
    let waves: Vec<ChannelWave> = base.iter().map(|&b| random_wave(&mut rng, b)).collect();

    let mut features: Vec<[f64; FEATURES]> = (0..length)
        .map(|i| {
            let t = i as f64 * IMU_PERIOD;
            let mut f = [0.0; FEATURES];
            for (d, w) in waves.iter().enumerate() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                f[d] = w.sample(t) + NOISE_FRAC * w.amplitude * noise;
            }
            f
        })
        .collect();
    let mut labels = vec![false; length];

    if kind == ScenarioKind::Abnormal {
        // spikes: single-timestamp amplitude excursions on 1–3 channels
        let spike_spots = place_segments(&mut rng, length, &vec![1; spec.spikes]);
        for (at, _) in spike_spots {
            let n_ch = rng.random_range(1..=3usize);
            for _ in 0..n_ch {
                let d = rng.random_range(0..FEATURES);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                features[at][d] += sign * spec.spike_magnitude * waves[d].amplitude;
            }
            labels[at] = true;
        }
        // step offsets over an extent
        let steps = place_segments(&mut rng, length, &vec![spec.step_len; spec.steps]);
        for (start, len) in steps {
            let d = rng.random_range(0..FEATURES);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let delta = sign * spec.step_magnitude * waves[d].amplitude;
            for i in start..start + len {
                features[i][d] += delta;
                labels[i] = true;
            }
        }
        // high-frequency bursts over an extent
        let bursts = place_segments(&mut rng, length, &vec![spec.burst_len; spec.bursts]);
        for (start, len) in bursts {
            let d = rng.random_range(0..FEATURES);
            let freq = rng.random_range(2.0..4.0);
            let phase = rng.random_range(0.0..TAU);
            for i in start..start + len {
                let t = i as f64 * IMU_PERIOD;
                features[i][d] +=
                    spec.burst_magnitude * waves[d].amplitude * (TAU * freq * t + phase).sin();
                labels[i] = true;
            }
        }
    }

    let imu: Vec<ImuSample> = features
        .iter()
        .enumerate()
        .map(|(i, f)| ImuSample::from_features(i as f64 * IMU_PERIOD, *f))
        .collect();
    Ok(Scenario {
        id: id.to_string(),
        kind,
        imu,
        imu_labels: labels,
        frames: Vec::new(),
        frame_labels: Vec::new(),
    })
}

/// Injected frame events.
#[derive(Clone, Copy, Debug)]
pub struct FrameAnomalySpec {
    pub occlusions: usize,
    pub occlusion_len: usize,
    /// Occluder side as a fraction of the frame side, in (0, 1).
    pub occlusion_frac: f64,
    pub displacements: usize,
    pub displacement_len: usize,
    /// Erratic per-frame jump in pixels; must exceed 1 px.
    pub displacement_px: f64,
}

impl Default for FrameAnomalySpec {
    fn default() -> Self {
        FrameAnomalySpec {
            occlusions: 2,
            occlusion_len: 4,
            occlusion_frac: 0.45,
            displacements: 2,
            displacement_len: 4,
            displacement_px: 10.0,
        }
    }
}

impl FrameAnomalySpec {
    fn validate(&self, size: usize) -> Result<()> {
        if self.occlusion_frac >= 1.0 || self.occlusion_frac <= 0.0 {
            return Err(DataError::InvalidAnomalySpec(format!(
                "occluder fraction {} must lie in (0, 1): occluder may not exceed the frame",
                self.occlusion_frac
            )));
        }
        if self.displacement_px <= 1.0 {
            return Err(DataError::InvalidAnomalySpec(format!(
                "displacement of {} px is below the 1-px noise floor",
                self.displacement_px
            )));
        }
        if (self.occlusion_frac * size as f64) < 1.0 {
            return Err(DataError::InvalidAnomalySpec(
                "occluder smaller than one pixel".into(),
            ));
        }
        Ok(())
    }
}

struct SceneState {
    size: usize,
    bg_phase: (f64, f64),
    bg_freq: (f64, f64),
    obj_pos: (f64, f64),
    obj_vel: (f64, f64),
    obj_side: usize,
    obj_intensity: f64,
}

impl SceneState {
    fn advance(&mut self) {
        self.obj_pos.0 += self.obj_vel.0;
        self.obj_pos.1 += self.obj_vel.1;
        let lim = (self.size - self.obj_side) as f64;
        // bounce off the edges
        for (p, v) in [
            (&mut self.obj_pos.0, &mut self.obj_vel.0),
            (&mut self.obj_pos.1, &mut self.obj_vel.1),
        ] {
            if *p < 0.0 {
                *p = -*p;
                *v = -*v;
            }
            if *p > lim {
                *p = 2.0 * lim - *p;
                *v = -*v;
            }
        }
    }

    fn render(&self, rng: &mut ChaCha8Rng, noise: f64) -> Vec<f64> {
        let n = self.size;
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let bg = 0.25
                    * ((TAU * self.bg_freq.0 * r as f64 / n as f64 + self.bg_phase.0).sin()
                        + (TAU * self.bg_freq.1 * c as f64 / n as f64 + self.bg_phase.1).sin());
                data[r * n + c] = bg;
            }
        }
        let (oy, ox) = (
            self.obj_pos.0.round().max(0.0) as usize,
            self.obj_pos.1.round().max(0.0) as usize,
        );
        for r in oy..(oy + self.obj_side).min(n) {
            for c in ox..(ox + self.obj_side).min(n) {
                data[r * n + c] = self.obj_intensity;
            }
        }
        for v in &mut data {
            let e: f64 = StandardNormal.sample(rng);
            *v = (*v + noise * e).clamp(-1.0, 1.0);
        }
        data
    }
}

/// Generates the frame part of a scenario: a sinusoidal background with one
/// object moving at constant velocity (bouncing at the edges). Abnormal
/// scenarios inject sudden occluders and bursts of erratic displacement,
/// labeling every affected frame.
pub fn generate_frame_scenario(
    id: &str,
    kind: ScenarioKind,
    length: usize,
    size: usize,
    spec: &FrameAnomalySpec,
    seed: u64,
) -> Result<Scenario> {
    if length < 4 {
        return Err(DataError::StreamTooShort {
            need: 4,
            got: length,
        });
    }
    spec.validate(size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF7A3_0001);
    let obj_side = (size / 5).max(2);
    let mut state = SceneState {
        size,
        bg_phase: (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)),
        bg_freq: (rng.random_range(1.0..2.5), rng.random_range(1.0..2.5)),
        obj_pos: (
            rng.random_range(0.0..(size - obj_side) as f64),
            rng.random_range(0.0..(size - obj_side) as f64),
        ),
        obj_vel: (
            rng.random_range(0.5..1.8) * if rng.random::<bool>() { 1.0 } else { -1.0 },
            rng.random_range(0.5..1.8) * if rng.random::<bool>() { 1.0 } else { -1.0 },
        ),
        obj_side,
        obj_intensity: 0.85,
    };
    let noise = 0.015;

    let mut labels = vec![false; length];
    let mut occluded: Vec<(usize, (usize, usize, usize))> = Vec::new(); // frame → (y, x, side)
    let mut erratic = vec![false; length];
    if kind == ScenarioKind::Abnormal {
        let occ = place_segments(
            &mut rng,
            length,
            &vec![spec.occlusion_len; spec.occlusions],
        );
        let occ_side = ((spec.occlusion_frac * size as f64) as usize).max(1);
        for (start, len) in occ {
            let oy = rng.random_range(0..=(size - occ_side));
            let ox = rng.random_range(0..=(size - occ_side));
            for i in start..start + len {
                occluded.push((i, (oy, ox, occ_side)));
                labels[i] = true;
            }
        }
        let disp = place_segments(
            &mut rng,
            length,
            &vec![spec.displacement_len; spec.displacements],
        );
        for (start, len) in disp {
            for i in start..start + len {
                erratic[i] = true;
                labels[i] = true;
            }
        }
    }

    let mut frames = Vec::with_capacity(length);
    for i in 0..length {
        if erratic[i] {
            // erratic jump: teleport the object and kick the background phase
            let jump = spec.displacement_px;
            state.obj_pos.0 = (state.obj_pos.0
                + rng.random_range(-jump..jump))
            .clamp(0.0, (size - obj_side) as f64);
            state.obj_pos.1 = (state.obj_pos.1
                + rng.random_range(-jump..jump))
            .clamp(0.0, (size - obj_side) as f64);
            state.bg_phase.0 += rng.random_range(-1.2..1.2);
            state.bg_phase.1 += rng.random_range(-1.2..1.2);
        } else {
            state.advance();
        }
        let mut data = state.render(&mut rng, noise);
        for &(fi, (oy, ox, side)) in &occluded {
            if fi == i {
                for r in oy..(oy + side).min(size) {
                    for c in ox..(ox + side).min(size) {
                        data[r * size + c] = -0.95;
                    }
                }
            }
        }
        frames.push(Frame::new(data, size, i as f64 * FRAME_PERIOD)?);
    }

    Ok(Scenario {
        id: id.to_string(),
        kind,
        imu: Vec::new(),
        imu_labels: Vec::new(),
        frames,
        frame_labels: labels,
    })
}

/// Generates a full scenario (IMU and frames share the id and kind but are
/// sampled independently at their own rates).
pub fn generate_scenario(
    id: &str,
    kind: ScenarioKind,
    imu_length: usize,
    frame_length: usize,
    frame_size: usize,
    imu_spec: &ImuAnomalySpec,
    frame_spec: &FrameAnomalySpec,
    seed: u64,
) -> Result<Scenario> {
    let imu_part = generate_imu_scenario(id, kind, imu_length, imu_spec, seed)?;
    let frame_part = generate_frame_scenario(id, kind, frame_length, frame_size, frame_spec, seed)?;
    Ok(Scenario {
        id: id.to_string(),
        kind,
        imu: imu_part.imu,
        imu_labels: imu_part.imu_labels,
        frames: frame_part.frames,
        frame_labels: frame_part.frame_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::label_ground_truth;

    #[test]
    fn normal_scenario_has_no_abnormal_labels() {
        let sc = generate_imu_scenario(
            "normal-0",
            ScenarioKind::Normal,
            200,
            &ImuAnomalySpec::default(),
            1,
        )
        .unwrap();
        assert_eq!(sc.imu.len(), 200);
        assert!(sc.imu_labels.iter().all(|&l| !l));
    }

    #[test]
    fn abnormal_scenario_labels_injected_timestamps() {
        let sc = generate_imu_scenario(
            "abnormal-0",
            ScenarioKind::Abnormal,
            600,
            &ImuAnomalySpec::default(),
            2,
        )
        .unwrap();
        let n_abnormal = sc.imu_labels.iter().filter(|&&l| l).count();
        assert!(n_abnormal > 0);
        // spikes + extents as configured (placement may drop events only if
        // the stream is too crowded; 600 samples fit the defaults)
        let spec = ImuAnomalySpec::default();
        let expected = spec.spikes
            + spec.steps * spec.step_len
            + spec.bursts * spec.burst_len;
        assert!(
            n_abnormal <= expected && n_abnormal >= expected / 2,
            "{n_abnormal} labeled of {expected} expected"
        );
    }

    #[test]
    fn weak_spike_magnitude_is_rejected() {
        let spec = ImuAnomalySpec {
            spike_magnitude: 0.04,
            ..ImuAnomalySpec::default()
        };
        assert!(matches!(
            generate_imu_scenario("x", ScenarioKind::Abnormal, 100, &spec, 3),
            Err(DataError::InvalidAnomalySpec(_))
        ));
    }

    #[test]
    fn generated_normals_pass_their_own_envelope() {
        let sc = generate_imu_scenario(
            "normal-1",
            ScenarioKind::Normal,
            300,
            &ImuAnomalySpec::default(),
            4,
        )
        .unwrap();
        let labels = label_ground_truth(&sc.imu, &[&sc.imu]).unwrap();
        assert!(labels.iter().all(|&l| !l));
    }

    #[test]
    fn abnormal_spikes_exit_the_normal_envelope() {
        // same seed ⇒ same base waves; anomalies must leave the envelope of
        // the normal twin for at least the spike timestamps
        let normal = generate_imu_scenario(
            "n",
            ScenarioKind::Normal,
            600,
            &ImuAnomalySpec::default(),
            5,
        )
        .unwrap();
        let abnormal = generate_imu_scenario(
            "a",
            ScenarioKind::Abnormal,
            600,
            &ImuAnomalySpec::default(),
            5,
        )
        .unwrap();
        let labels = label_ground_truth(&abnormal.imu, &[&normal.imu]).unwrap();
        let flagged = labels.iter().filter(|&&l| l).count();
        assert!(flagged > 0, "no injected sample left the normal envelope");
    }

    #[test]
    fn determinism_same_seed_bitwise() {
        let a = generate_imu_scenario("s", ScenarioKind::Abnormal, 300, &ImuAnomalySpec::default(), 9)
            .unwrap();
        let b = generate_imu_scenario("s", ScenarioKind::Abnormal, 300, &ImuAnomalySpec::default(), 9)
            .unwrap();
        for (x, y) in a.imu.iter().zip(&b.imu) {
            assert_eq!(x.features(), y.features());
        }
        assert_eq!(a.imu_labels, b.imu_labels);
        let fa = generate_frame_scenario("s", ScenarioKind::Abnormal, 40, 32, &FrameAnomalySpec::default(), 9)
            .unwrap();
        let fb = generate_frame_scenario("s", ScenarioKind::Abnormal, 40, 32, &FrameAnomalySpec::default(), 9)
            .unwrap();
        for (x, y) in fa.frames.iter().zip(&fb.frames) {
            assert_eq!(x.data, y.data);
        }
    }

    #[test]
    fn constant_velocity_frames_have_no_abnormal_labels() {
        let sc = generate_frame_scenario(
            "normal-0",
            ScenarioKind::Normal,
            30,
            32,
            &FrameAnomalySpec::default(),
            11,
        )
        .unwrap();
        assert_eq!(sc.frames.len(), 30);
        assert!(sc.frame_labels.iter().all(|&l| !l));
        assert!(sc
            .frames
            .iter()
            .all(|f| f.data.iter().all(|v| (-1.0..=1.0).contains(v))));
    }

    #[test]
    fn occluder_frames_are_labeled() {
        let sc = generate_frame_scenario(
            "abnormal-0",
            ScenarioKind::Abnormal,
            40,
            32,
            &FrameAnomalySpec {
                displacements: 0,
                ..FrameAnomalySpec::default()
            },
            12,
        )
        .unwrap();
        let n = sc.frame_labels.iter().filter(|&&l| l).count();
        let spec = FrameAnomalySpec::default();
        assert_eq!(n, spec.occlusions * spec.occlusion_len);
    }

    #[test]
    fn oversized_occluder_is_rejected() {
        let spec = FrameAnomalySpec {
            occlusion_frac: 1.2,
            ..FrameAnomalySpec::default()
        };
        assert!(matches!(
            generate_frame_scenario("x", ScenarioKind::Abnormal, 20, 32, &spec, 13),
            Err(DataError::InvalidAnomalySpec(_))
        ));
    }

    #[test]
    fn subpixel_displacement_is_rejected() {
        let spec = FrameAnomalySpec {
            displacement_px: 0.5,
            ..FrameAnomalySpec::default()
        };
        assert!(matches!(
            generate_frame_scenario("x", ScenarioKind::Abnormal, 20, 32, &spec, 14),
            Err(DataError::InvalidAnomalySpec(_))
        ));
    }
}
