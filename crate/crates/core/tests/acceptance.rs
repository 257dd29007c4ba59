//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers (run with `--nocapture` to see them).
//!
//! The synthetic detection benchmark and the calibration-by-construction
//! checks share one full desk-scale pipeline run.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adrf_core::data::{
    build_frame_dataset, generate_frame_scenario, make_windows, FrameAnomalySpec, Scenario,
    ScenarioKind, WindowMode,
};
use adrf_core::gradcheck::{check_gradients, rel_error, DEFAULT_STEP};
use adrf_core::imu::{
    forecast_loss_grads, reconstruction_loss_grads, train_autoencoder, AutoencoderModel,
    ForecasterModel, ImuSample, ImuTrainConfig, ImuWindow,
};
use adrf_core::nn::ParamModel;
use adrf_core::pipeline::{
    calibration_error_streams, run_full_pipeline, Config, DetectorSource, EvalReport, Scale,
};
use adrf_core::stats::{
    fit_family, select_best_fit, DistributionFamily, FamilyKind, ThresholdSet,
};
use adrf_core::tensor::{LossKind, Tensor};
use adrf_core::vision::{
    cgan_finetune, frame_error, predict_frame, pretrain_codec, train_forecaster, CganConfig,
    CodecArch, Discriminator, Frame, FrameSequence, VisionTrainConfig,
};

fn tempdir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("adrf-accept-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

// ── criterion 1 ───────────────────────────────────────────────────────────

#[test]
fn criterion_1_birnbaum_saunders_threshold_cross_check() {
    let d = DistributionFamily::BirnbaumSaunders {
        c: 2.053,
        loc: 0.022,
        scale: 0.019,
    };
    let q = d.quantile(0.95).unwrap();
    let reported = 0.276;
    assert!(
        (q - reported).abs() <= 0.002,
        "quantile(0.95) = {q}, reported {reported}"
    );
    println!(
        "criterion 1 (BS threshold cross-check): PASS — quantile(0.95) = {q:.6} vs reported 0.276 (|Δ| = {:.5})",
        (q - reported).abs()
    );
}

// ── criterion 2 ───────────────────────────────────────────────────────────

fn blank_frame_scenario(id: &str, kind: ScenarioKind, frames: usize) -> Scenario {
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
fn criterion_2_window_and_split_count_identities() {
    let stream = |n: usize| -> Vec<ImuSample> {
        (0..n)
            .map(|i| ImuSample::from_features(i as f64 * 0.1, [0.01 * i as f64; 6]))
            .collect()
    };
    // training-set identities: sliding windows over N contiguous samples
    // give N−2 reconstruction and N−3 forecast windows
    let s551 = stream(551);
    assert_eq!(make_windows(&s551, WindowMode::Reconstruction).unwrap().len(), 549);
    assert_eq!(make_windows(&s551, WindowMode::Forecast).unwrap().len(), 548);

    // The reported thresholding-stream counts (302 timestamps → 299 3-frame
    // and 298 4-frame segments) are one below that identity for both modes;
    // they correspond to one of the 302 records not surviving ingestion.
    // A contiguous 302-sample stream obeys the identity:
    let s302 = stream(302);
    assert_eq!(make_windows(&s302, WindowMode::Reconstruction).unwrap().len(), 300);
    assert_eq!(make_windows(&s302, WindowMode::Forecast).unwrap().len(), 299);
    // and with one record dropped (301 effective samples), exactly the
    // reported 299/298 emerge:
    let s301 = stream(301);
    assert_eq!(make_windows(&s301, WindowMode::Reconstruction).unwrap().len(), 299);
    assert_eq!(make_windows(&s301, WindowMode::Forecast).unwrap().len(), 298);
    // the same counts arise from an edge gap under the gap-discard rule
    let mut gappy = stream(302);
    for s in &mut gappy[1..] {
        s.t += 0.3;
    }
    assert_eq!(make_windows(&gappy, WindowMode::Reconstruction).unwrap().len(), 299);
    assert_eq!(make_windows(&gappy, WindowMode::Forecast).unwrap().len(), 298);

    // 810-sequence pool → 610 train / 100 threshold / 100 test, plus 196
    // abnormal sequences appended to the test set (296 total)
    let mut scenarios: Vec<Scenario> = (0..3)
        .map(|i| blank_frame_scenario(&format!("normal-{i}"), ScenarioKind::Normal, 71))
        .collect();
    scenarios.extend(
        (3..6).map(|i| blank_frame_scenario(&format!("normal-{i}"), ScenarioKind::Normal, 70)),
    );
    scenarios.extend(
        (0..4).map(|i| blank_frame_scenario(&format!("abnormal-{i}"), ScenarioKind::Abnormal, 52)),
    );
    let split = build_frame_dataset(&scenarios, 11, 100, 100).unwrap();
    assert_eq!(split.train.len(), 610);
    assert_eq!(split.threshold.len(), 100);
    assert_eq!(split.test.len(), 296);
    println!(
        "criterion 2 (window/split identities): PASS — 551→549/548 exactly; reported 302→299/298 reproduced (301 surviving samples or an edge gap; a contiguous 302 gives the N−2/N−3 identity 300/299); 810→610/100/100; test 100+196=296"
    );
}

// ── criterion 3 ───────────────────────────────────────────────────────────

fn seeded_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    use rand::Rng;
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(data, shape).unwrap()
}

#[test]
fn criterion_3_gradient_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut worst: f64 = 0.0;
    let mut record = |name: &str, err: f64| {
        assert!(err < 1e-4, "{name}: max relative gradient error {err}");
        if err > worst {
            worst = err;
        }
    };

    // every differentiable op on random small inputs
    let a = seeded_tensor(&mut rng, &[3, 4], -1.0, 1.0);
    let b = seeded_tensor(&mut rng, &[4, 2], -1.0, 1.0);
    let r = check_gradients(&[a, b], DEFAULT_STEP, |t, ids| {
        let y = t.matmul(ids[0], ids[1])?;
        let s = t.tanh(y)?;
        t.mean_all(s)
    })
    .unwrap();
    record("matmul∘tanh", r.max_rel_error);

    let x = seeded_tensor(&mut rng, &[2, 3], -1.0, 1.0);
    let y = seeded_tensor(&mut rng, &[2, 3], -1.0, 1.0);
    for (name, kind) in [("add", 0), ("sub", 1), ("mul", 2)] {
        let r = check_gradients(&[x.clone(), y.clone()], DEFAULT_STEP, |t, ids| {
            let z = match kind {
                0 => t.add(ids[0], ids[1])?,
                1 => t.sub(ids[0], ids[1])?,
                _ => t.mul(ids[0], ids[1])?,
            };
            let sq = t.mul(z, z)?;
            t.sum_all(sq)
        })
        .unwrap();
        record(name, r.max_rel_error);
    }

    for (name, which) in [("tanh", 0), ("sigmoid", 1), ("leaky_relu", 2), ("scale", 3)] {
        let x = seeded_tensor(&mut rng, &[8], -2.0, 2.0);
        let r = check_gradients(&[x], DEFAULT_STEP, |t, ids| {
            let z = match which {
                0 => t.tanh(ids[0])?,
                1 => t.sigmoid(ids[0])?,
                2 => t.leaky_relu(ids[0], 0.2)?,
                _ => t.scale(ids[0], -1.7)?,
            };
            t.mean_all(z)
        })
        .unwrap();
        record(name, r.max_rel_error);
    }

    // abs and ln away from their kinks/poles
    let xa = seeded_tensor(&mut rng, &[6], 0.5, 2.0);
    let r = check_gradients(&[xa.clone()], DEFAULT_STEP, |t, ids| {
        let z = t.abs(ids[0])?;
        t.sum_all(z)
    })
    .unwrap();
    record("abs", r.max_rel_error);
    let r = check_gradients(&[xa], DEFAULT_STEP, |t, ids| {
        let z = t.ln(ids[0])?;
        t.sum_all(z)
    })
    .unwrap();
    record("ln", r.max_rel_error);

    // conv2d in the configurations the codecs use, plus bias and upsample
    for (stride, pad) in [(1usize, 1usize), (2, 1), (1, 0)] {
        let x = seeded_tensor(&mut rng, &[2, 6, 6], -1.0, 1.0);
        let w = seeded_tensor(&mut rng, &[3, 2, 3, 3], -0.5, 0.5);
        let bias = seeded_tensor(&mut rng, &[3], -0.3, 0.3);
        let r = check_gradients(&[x, w, bias], DEFAULT_STEP, |t, ids| {
            let y = t.conv2d(ids[0], ids[1], stride, pad)?;
            let y = t.bias_add_chan(y, ids[2])?;
            let y = t.leaky_relu(y, 0.2)?;
            t.mean_all(y)
        })
        .unwrap();
        record(&format!("conv2d(s{stride},p{pad})+bias"), r.max_rel_error);
    }
    let x = seeded_tensor(&mut rng, &[2, 3, 3], -1.0, 1.0);
    let r = check_gradients(&[x], DEFAULT_STEP, |t, ids| {
        let y = t.upsample_nearest(ids[0], 2)?;
        let y = t.tanh(y)?;
        t.mean_all(y)
    })
    .unwrap();
    record("upsample", r.max_rel_error);

    // structural ops: reshape, slice, concat
    let x = seeded_tensor(&mut rng, &[4, 3], -1.0, 1.0);
    let y = seeded_tensor(&mut rng, &[2, 3], -1.0, 1.0);
    let r = check_gradients(&[x, y], DEFAULT_STEP, |t, ids| {
        let flat = t.reshape(ids[0], &[12])?;
        let back = t.reshape(flat, &[4, 3])?;
        let top = t.slice_rows(back, 0, 2)?;
        let cat = t.concat(&[top, ids[1]], 0)?;
        let sq = t.mul(cat, cat)?;
        t.sum_all(sq)
    })
    .unwrap();
    record("reshape/slice/concat", r.max_rel_error);

    // losses and the stable bce-with-logit
    let p = seeded_tensor(&mut rng, &[5], 0.05, 0.95);
    let q = seeded_tensor(&mut rng, &[5], 0.05, 0.95);
    for kind in [LossKind::Mse, LossKind::Mae, LossKind::MseMae, LossKind::Bce] {
        let r = check_gradients(&[p.clone(), q.clone()], DEFAULT_STEP, |t, ids| {
            t.loss(kind, ids[0], ids[1])
        })
        .unwrap();
        record(&format!("loss {kind:?}"), r.max_rel_error);
    }
    let z = seeded_tensor(&mut rng, &[1], -2.0, 2.0);
    let r = check_gradients(&[z], DEFAULT_STEP, |t, ids| t.bce_with_logit(ids[0], 1.0)).unwrap();
    record("bce_with_logit", r.max_rel_error);

    // both LSTM models end to end: sampled-element finite differences
    // against the recorded backward pass
    let window = ImuWindow::new(
        [
            ImuSample::from_features(0.0, [0.3, -0.2, 0.1, 0.5, -0.4, 0.2]),
            ImuSample::from_features(0.1, [0.25, -0.1, 0.15, 0.45, -0.35, 0.3]),
            ImuSample::from_features(0.2, [0.2, 0.0, 0.2, 0.4, -0.3, 0.4]),
        ],
        Some(ImuSample::from_features(
            0.3,
            [0.15, 0.1, 0.25, 0.35, -0.25, 0.5],
        )),
    )
    .unwrap();
    let mut check_model = |name: &str,
                           params_len: usize,
                           eval: &mut dyn FnMut() -> (f64, Vec<Vec<f64>>),
                           perturb: &mut dyn FnMut(usize, usize, f64)| {
        use rand::Rng;
        let (_, analytic) = eval();
        assert_eq!(analytic.len(), params_len);
        let h = DEFAULT_STEP;
        let mut worst_model: f64 = 0.0;
        for pi in 0..params_len {
            let n = analytic[pi].len();
            for _ in 0..6.min(n) {
                let j = rng.random_range(0..n);
                perturb(pi, j, h);
                let (up, _) = eval();
                perturb(pi, j, -2.0 * h);
                let (down, _) = eval();
                perturb(pi, j, h);
                let numeric = (up - down) / (2.0 * h);
                let err = rel_error(analytic[pi][j], numeric);
                worst_model = worst_model.max(err);
            }
        }
        record(name, worst_model);
    };

    let ae = std::cell::RefCell::new(AutoencoderModel::new(55));
    let n_ae = ae.borrow().params().len();
    let w1 = window;
    check_model(
        "autoencoder model",
        n_ae,
        &mut || reconstruction_loss_grads(&ae.borrow(), &w1).unwrap(),
        &mut |pi, j, delta| {
            ae.borrow_mut().params_mut()[pi].1.data_mut()[j] += delta;
        },
    );
    let fc = std::cell::RefCell::new(ForecasterModel::new(56));
    let n_fc = fc.borrow().params().len();
    check_model(
        "forecaster model",
        n_fc,
        &mut || forecast_loss_grads(&fc.borrow(), &w1).unwrap(),
        &mut |pi, j, delta| {
            fc.borrow_mut().params_mut()[pi].1.data_mut()[j] += delta;
        },
    );

    println!(
        "criterion 3 (gradient suite): PASS — max relative error {worst:.2e} across all ops and both LSTM models (< 1e-4)"
    );
}

// ── shared full-pipeline fixture (criteria 4 and 7) ───────────────────────

struct PipelineFixture {
    root: PathBuf,
    report: EvalReport,
    wall: Duration,
}

static FIXTURE: OnceLock<Result<PipelineFixture, String>> = OnceLock::new();

fn fixture() -> &'static PipelineFixture {
    FIXTURE
        .get_or_init(|| {
            let root = tempdir("pipeline");
            let cfg = Config::defaults(Scale::Desk);
            let started = Instant::now();
            let report =
                run_full_pipeline(&cfg, 7, &root).map_err(|e| format!("pipeline failed: {e}"))?;
            Ok(PipelineFixture {
                root,
                report,
                wall: started.elapsed(),
            })
        })
        .as_ref()
        .expect("desk pipeline run")
}

fn calibration_flag_fractions(fx: &PipelineFixture) -> Vec<(&'static str, usize, f64)> {
    let thresholds = ThresholdSet::from_kv(
        &std::fs::read_to_string(fx.root.join("calibration/thresholds.txt")).unwrap(),
    )
    .unwrap();
    let streams =
        calibration_error_streams(&fx.root.join("corpus"), &fx.root.join("models")).unwrap();
    let frac = |xs: &[f64], th: f64| -> f64 {
        xs.iter().filter(|&&x| x > th).count() as f64 / xs.len() as f64
    };
    vec![
        (
            "autoencoder e_a",
            streams.autoencoder_angular.len(),
            frac(&streams.autoencoder_angular, thresholds.autoencoder_angular.threshold),
        ),
        (
            "autoencoder e_l",
            streams.autoencoder_linear.len(),
            frac(&streams.autoencoder_linear, thresholds.autoencoder_linear.threshold),
        ),
        (
            "forecaster e_a",
            streams.forecaster_angular.len(),
            frac(&streams.forecaster_angular, thresholds.forecaster_angular.threshold),
        ),
        (
            "forecaster e_l",
            streams.forecaster_linear.len(),
            frac(&streams.forecaster_linear, thresholds.forecaster_linear.threshold),
        ),
        (
            "vision e_v",
            streams.vision.len(),
            frac(&streams.vision, thresholds.vision.threshold),
        ),
    ]
}

#[test]
fn criterion_4_calibration_by_construction() {
    let fx = fixture();
    let mut detail = String::new();
    for (name, n, fraction) in calibration_flag_fractions(fx) {
        let sigma = (0.05f64 * 0.95 / n as f64).sqrt();
        let tol = 3.0 * sigma;
        assert!(
            (fraction - 0.05).abs() <= tol,
            "{name}: flagged fraction {fraction:.4} outside 5% ± {tol:.4} (n = {n})"
        );
        detail.push_str(&format!("{name} {:.1}% (n={n}); ", fraction * 100.0));
    }
    println!("criterion 4 (calibration by construction): PASS — {detail}within 5% ± 3σ each");
}

// ── criterion 5 ───────────────────────────────────────────────────────────

#[test]
fn criterion_5_ks_family_recovery() {
    let candidates = [
        FamilyKind::BirnbaumSaunders,
        FamilyKind::JohnsonSu,
        FamilyKind::Normal,
    ];
    let generators = [
        DistributionFamily::BirnbaumSaunders {
            c: 1.5,
            loc: 0.0,
            scale: 1.0,
        },
        DistributionFamily::JohnsonSu {
            a: 0.8,
            b: 1.2,
            loc: 0.0,
            scale: 1.0,
        },
        DistributionFamily::Normal {
            mean: 0.0,
            std: 1.0,
        },
    ];
    let mut detail = String::new();
    for gen in generators {
        let mut wins = 0;
        for trial in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let xs: Vec<f64> = (0..5000).map(|_| gen.sample(&mut rng)).collect();
            let best = select_best_fit(&xs, &candidates).unwrap();
            if best.family.kind() == gen.kind() {
                wins += 1;
            }
        }
        assert!(
            wins >= 9,
            "{}: recovered only {wins}/10 trials",
            gen.kind().name()
        );
        detail.push_str(&format!("{} {wins}/10; ", gen.kind().name()));
    }
    println!("criterion 5 (KS family recovery): PASS — {detail}each ≥ 9/10");
}

// ── criterion 6 ───────────────────────────────────────────────────────────

#[test]
fn criterion_6_quantile_cdf_consistency() {
    // validate the numerical machinery on the Normal first, at 1e-8
    let normal = DistributionFamily::Normal {
        mean: 0.0,
        std: 1.0,
    };
    for i in 1..100 {
        let p = i as f64 / 100.0;
        let q = normal.quantile(p).unwrap();
        assert!(
            (normal.cdf(q) - p).abs() < 1e-8,
            "normal inverter: p = {p}"
        );
    }

    // fit all five families to samples they can each represent, then check
    // |cdf(quantile(p)) − p| < 1e-6 on every fitted model (NIG and Gamma go
    // through the numerical inverter)
    let gen = DistributionFamily::BirnbaumSaunders {
        c: 0.9,
        loc: 0.1,
        scale: 0.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let xs: Vec<f64> = (0..4000).map(|_| gen.sample(&mut rng)).collect();
    let mut worst: f64 = 0.0;
    let mut fitted = Vec::new();
    for kind in FamilyKind::ALL {
        let model = fit_family(&xs, kind).unwrap();
        fitted.push(model);
    }
    for model in &fitted {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let q = model.family.quantile(p).unwrap();
            let err = (model.family.cdf(q) - p).abs();
            worst = worst.max(err);
            assert!(
                err < 1e-6,
                "{}: |cdf(quantile({p})) − {p}| = {err:.2e}",
                model.family.kind().name()
            );
        }
        // monotonicity across the grid
        let mut prev = f64::NEG_INFINITY;
        for i in 1..100 {
            let q = model.family.quantile(i as f64 / 100.0).unwrap();
            assert!(q > prev, "{}: quantile not increasing", model.family.kind().name());
            prev = q;
        }
    }
    println!(
        "criterion 6 (quantile/CDF consistency): PASS — worst |cdf(q(p))−p| = {worst:.2e} over all five fitted families, p ∈ {{0.01..0.99}}"
    );
}

// ── criterion 7 ───────────────────────────────────────────────────────────

fn aggregate_abnormal(
    report: &EvalReport,
    source: DetectorSource,
) -> adrf_core::pipeline::ConfusionCounts {
    let mut total = adrf_core::pipeline::ConfusionCounts::default();
    let det = report
        .detectors
        .iter()
        .find(|d| d.source == source)
        .expect("detector present");
    for s in &det.scenarios {
        if s.scenario.starts_with("abnormal") {
            total.add(&s.counts);
        }
    }
    total
}

#[test]
fn criterion_7_synthetic_detection_benchmark() {
    let fx = fixture();
    let minutes = fx.wall.as_secs_f64() / 60.0;
    assert!(
        fx.wall < Duration::from_secs(15 * 60),
        "pipeline took {minutes:.1} min (≥ 15 min)"
    );

    let ae = aggregate_abnormal(&fx.report, DetectorSource::ImuAutoencoder);
    let fc = aggregate_abnormal(&fx.report, DetectorSource::ImuForecaster);
    let ae_f1 = ae.f1().expect("autoencoder F1 defined");
    let fc_f1 = fc.f1().expect("forecaster F1 defined");
    assert!(ae_f1 >= 0.90, "autoencoder F1 {ae_f1:.4} < 0.90 ({ae:?})");
    assert!(fc_f1 >= 0.90, "forecaster F1 {fc_f1:.4} < 0.90 ({fc:?})");

    let vision = fx
        .report
        .detectors
        .iter()
        .find(|d| d.source == DetectorSource::Vision)
        .expect("vision detector");
    let recall = vision.overall.recall().expect("vision recall defined");
    assert!(recall >= 0.85, "vision recall {recall:.4} < 0.85");

    for (name, _, fraction) in calibration_flag_fractions(fx) {
        assert!(
            fraction <= 0.10,
            "{name}: calibration-set false-positive rate {fraction:.3} > 10%"
        );
    }
    println!(
        "criterion 7 (synthetic detection benchmark): PASS — autoencoder F1 {ae_f1:.3}, forecaster F1 {fc_f1:.3}, vision recall {recall:.3}, pipeline {minutes:.1} min"
    );
}

// ── criterion 8 ───────────────────────────────────────────────────────────

#[test]
fn criterion_8_overfit_oracles() {
    // single-window IMU training reaches mse < 1e-4
    let window = ImuWindow::new(
        [
            ImuSample::from_features(0.0, [0.1, -0.3, 0.2, 0.4, -0.1, 0.25]),
            ImuSample::from_features(0.1, [0.2, -0.2, 0.1, 0.5, -0.2, 0.2]),
            ImuSample::from_features(0.2, [0.15, -0.25, 0.15, 0.45, -0.15, 0.3]),
        ],
        None,
    )
    .unwrap();
    let cfg = ImuTrainConfig {
        epochs: 500,
        seed: 5,
        ..ImuTrainConfig::default()
    };
    let (model, _) = train_autoencoder(&[window], &cfg).unwrap();
    let err = adrf_core::imu::reconstruct_error(&model, &window).unwrap();
    let mse = err.e.iter().sum::<f64>() / 6.0;
    assert!(mse < 1e-4, "single-window reconstruction mse {mse}");

    // constant-sequence frame prediction matches the codec round-trip
    // within 2× its reconstruction error (desk-scale architecture)
    let frame = {
        let n = 32;
        let data: Vec<f64> = (0..n * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                0.4 * ((r as f64 / 5.0).sin() + (c as f64 / 7.0).cos()) / 2.0
            })
            .collect();
        Frame::new(data, n, 0.0).unwrap()
    };
    let vcfg = VisionTrainConfig {
        epochs: 30,
        lr: 1e-3,
        decay_epochs: vec![15, 24],
        decay_factor: 10.0,
        seed: 6,
        augment: None,
    };
    let (codec, _) = pretrain_codec(&vec![frame.clone(); 3], CodecArch::desk(), &vcfg).unwrap();
    let recon_err = frame_error(&codec.reconstruct(&frame).unwrap(), &frame).unwrap();
    let seq = FrameSequence::new(
        [frame.clone(), frame.clone(), frame.clone()],
        frame.clone(),
    )
    .unwrap();
    let (model, _) = train_forecaster(&vec![seq; 2], codec, &vcfg).unwrap();
    let (pred, _) = predict_frame(&model, &[frame.clone(), frame.clone(), frame.clone()]).unwrap();
    let pred_err = frame_error(&pred, &frame).unwrap();
    assert!(
        pred_err <= (2.0 * recon_err).max(1e-6),
        "prediction error {pred_err:.3e} vs codec round-trip {recon_err:.3e}"
    );
    println!(
        "criterion 8 (overfit oracles): PASS — single-window mse {mse:.2e} < 1e-4; constant-sequence prediction {pred_err:.2e} ≤ 2× codec {recon_err:.2e}"
    );
}

// ── criterion 9 ───────────────────────────────────────────────────────────

#[test]
fn criterion_9_frozen_phase_and_determinism() {
    // reduced corpus, full pipeline twice with the same seed
    let over = Config::parse(
        "[corpus]\nnormal_scenarios = 3\nabnormal_scenarios = 1\nimu_samples = 60\nframes = 14\n\
         [imu]\nepochs = 1\n[vision]\ncodec_epochs = 1\nforecaster_epochs = 1\ncgan_epochs = 1\n\
         [split]\nvision_threshold = 30\nvision_test = 15\n",
    )
    .unwrap();
    let cfg = Config::defaults(Scale::Desk).merged_with(&over);
    let root_a = tempdir("det-a");
    let root_b = tempdir("det-b");
    run_full_pipeline(&cfg, 99, &root_a).unwrap();
    run_full_pipeline(&cfg, 99, &root_b).unwrap();

    let mut compared = 0;
    for name in [
        "models/imu_autoencoder.ckpt",
        "models/imu_forecaster.ckpt",
        "models/vision_codec.ckpt",
        "models/vision_forecaster_pretrained.ckpt",
        "models/vision_forecaster.ckpt",
        "models/vision_discriminator.ckpt",
        "calibration/thresholds.txt",
        "eval/eval.json",
        "eval/report.csv",
    ] {
        let a = std::fs::read(root_a.join(name)).unwrap();
        let b = std::fs::read(root_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical seeded runs");
        compared += 1;
    }
    // the frozen-phase invariant is enforced inside train_forecaster (it
    // errors if codec bytes change), and both runs completed
    println!(
        "criterion 9 (frozen phase + determinism): PASS — {compared} artifacts bit-identical across two seeded runs; codec frozen-phase check enforced in training"
    );
}

// ── criterion 10 ──────────────────────────────────────────────────────────

#[test]
fn criterion_10_cgan_finetuning_stability() {
    // reduced frame corpus: 3 normal + 2 abnormal scenarios
    let spec = FrameAnomalySpec::default();
    let mut scenarios = Vec::new();
    for i in 0..3 {
        scenarios.push(
            generate_frame_scenario(&format!("normal-{i}"), ScenarioKind::Normal, 24, 32, &spec, 70 + i)
                .unwrap(),
        );
    }
    for i in 0..2 {
        scenarios.push(
            generate_frame_scenario(
                &format!("abnormal-{i}"),
                ScenarioKind::Abnormal,
                24,
                32,
                &spec,
                170 + i,
            )
            .unwrap(),
        );
    }
    let dataset = build_frame_dataset(&scenarios, 31, 33, 30).unwrap();
    let train: Vec<FrameSequence> = dataset.train.iter().map(|s| s.seq.clone()).collect();
    let heldout: Vec<FrameSequence> = dataset.threshold.iter().map(|s| s.seq.clone()).collect();
    assert!(train.len() >= 50, "train pool {}", train.len());

    let frames: Vec<Frame> = train
        .iter()
        .take(40)
        .flat_map(|s| s.inputs.iter().cloned().chain([s.target.clone()]))
        .collect();
    let vcfg = VisionTrainConfig {
        epochs: 4,
        lr: 1e-3,
        decay_epochs: vec![],
        decay_factor: 10.0,
        seed: 21,
        augment: None,
    };
    let (codec, _) = pretrain_codec(&frames, CodecArch::desk(), &vcfg).unwrap();
    let (mut model, _) = train_forecaster(&train, codec, &vcfg).unwrap();

    let mean_err = |m: &adrf_core::vision::CnnLstmForecaster, seqs: &[FrameSequence]| -> f64 {
        seqs.iter()
            .map(|s| {
                let (p, _) = predict_frame(m, &s.inputs).unwrap();
                frame_error(&p, &s.target).unwrap()
            })
            .sum::<f64>()
            / seqs.len() as f64
    };
    let recall_at = |m: &adrf_core::vision::CnnLstmForecaster, theta: f64| -> f64 {
        let (mut tp, mut fn_) = (0, 0);
        for s in &dataset.test {
            let (p, _) = predict_frame(m, &s.seq.inputs).unwrap();
            let e = frame_error(&p, &s.seq.target).unwrap();
            if s.label {
                if e > theta {
                    tp += 1;
                } else {
                    fn_ += 1;
                }
            }
        }
        tp as f64 / (tp + fn_).max(1) as f64
    };
    let empirical_theta = |m: &adrf_core::vision::CnnLstmForecaster| -> f64 {
        let mut errs: Vec<f64> = heldout
            .iter()
            .map(|s| {
                let (p, _) = predict_frame(m, &s.inputs).unwrap();
                frame_error(&p, &s.target).unwrap()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        errs[(errs.len() as f64 * 0.95) as usize - 1]
    };

    let pre_err = mean_err(&model, &heldout);
    let pre_recall = recall_at(&model, empirical_theta(&model));

    let mut disc = Discriminator::new(77, CodecArch::desk());
    let ccfg = CganConfig {
        epochs: 20,
        seed: 33,
        ..CganConfig::default()
    };
    let hist = cgan_finetune(&mut model, &mut disc, &train, &ccfg).unwrap();
    assert_eq!(hist.d_loss.len(), 20, "all 20 fine-tuning epochs completed");
    for (i, ((d, a), p)) in hist
        .d_loss
        .iter()
        .zip(&hist.g_adv_loss)
        .zip(&hist.g_pred_loss)
        .enumerate()
    {
        assert!(
            d.is_finite() && a.is_finite() && p.is_finite(),
            "non-finite loss at epoch {i}"
        );
        assert!(*d < 50.0 && *a < 50.0 && *p < 50.0, "unbounded loss at epoch {i}");
    }

    let post_err = mean_err(&model, &heldout);
    assert!(
        post_err <= pre_err * 1.20,
        "held-out prediction error degraded {pre_err:.4e} → {post_err:.4e} (> 20%)"
    );

    // report annotation, not a gate: recall direction vs the
    // prediction-loss-only model (the paper observed recall improving with
    // the adversarial term on its dataset)
    let post_recall = recall_at(&model, empirical_theta(&model));
    let direction = if post_recall > pre_recall {
        "improved"
    } else if post_recall < pre_recall {
        "degraded"
    } else {
        "unchanged"
    };
    println!(
        "criterion 10 (CGAN fine-tuning stability): PASS — 20 epochs, losses finite and bounded, held-out error {pre_err:.3e} → {post_err:.3e} (≤ +20%); annotation: test recall {pre_recall:.3} → {post_recall:.3} ({direction}; reference reported recall rising from 0.9081 to 0.9821 with the adversarial term)"
    );
}
