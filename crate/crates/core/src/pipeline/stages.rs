//! End-to-end stage drivers shared by the CLI and the acceptance suite:
//! datagen → train-imu / train-vision → calibrate → infer → eval → report.

use std::fs;
use std::path::{Path, PathBuf};

use super::checkpoint::{assign_params, load_checkpoint, save_checkpoint, ModelKind};
use super::config::Config;
use super::events::{
    write_events_jsonl, ChannelFlag, DetectorSource, FlagEvent, StreamingImuEvaluator,
};
use super::eval::{confusion_for_stream, detector_report, EvalReport};
use super::PipelineError;
use crate::data::{
    self, build_frame_dataset, fit_scaler, io as dio, make_windows, DatasetSplit,
    FrameAnomalySpec, ImuAnomalySpec, ScalerParams, Scenario, ScenarioKind, WindowMode,
};
use crate::imu::{
    forecast_error, reconstruct_error, train_autoencoder, train_forecaster as train_imu_forecaster,
    AutoencoderModel, ForecasterModel, ImuTrainConfig, ImuWindow,
};
use crate::stats::{
    calibrate_thresholds, ErrorDistributionModel, ErrorStreams, FamilyKind, ThresholdSet,
};
use crate::vision::{
    cgan_finetune, frame_error, predict_frame, pretrain_codec, train_forecaster,
    CganConfig, CnnLstmForecaster, CodecArch, ConvCodec, Discriminator, Frame, FrameSequence,
    VisionTrainConfig,
};

pub type Result<T> = std::result::Result<T, PipelineError>;

fn scenario_seed(base: u64, index: u64, abnormal: bool) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index * 2 + abnormal as u64)
}

fn scenario_kind(id: &str) -> ScenarioKind {
    if id.starts_with("abnormal") {
        ScenarioKind::Abnormal
    } else {
        ScenarioKind::Normal
    }
}

/// Generates the corpus: `normal-0` is the threshold scenario, the last
/// normal plus every abnormal scenario test, the remaining normals train.
pub fn stage_datagen(cfg: &Config, seed: u64, out: &Path) -> Result<DatasetSplit> {
    let n_normal = cfg.get_usize("corpus.normal_scenarios")?;
    let n_abnormal = cfg.get_usize("corpus.abnormal_scenarios")?;
    let imu_len = cfg.get_usize("corpus.imu_samples")?;
    let frames = cfg.get_usize("corpus.frames")?;
    let frame_size = cfg.get_usize("corpus.frame_size")?;
    if n_normal < 3 {
        return Err(PipelineError::MalformedConfig(
            "need at least 3 normal scenarios (threshold, train, test)".into(),
        ));
    }
    let imu_spec = ImuAnomalySpec::default();
    let frame_spec = FrameAnomalySpec::default();
    let mut scenarios = Vec::with_capacity(n_normal + n_abnormal);
    for i in 0..n_normal {
        scenarios.push(data::generate::generate_scenario(
            &format!("normal-{i}"),
            ScenarioKind::Normal,
            imu_len,
            frames,
            frame_size,
            &imu_spec,
            &frame_spec,
            scenario_seed(seed, i as u64, false),
        )?);
    }
    for i in 0..n_abnormal {
        scenarios.push(data::generate::generate_scenario(
            &format!("abnormal-{i}"),
            ScenarioKind::Abnormal,
            imu_len,
            frames,
            frame_size,
            &imu_spec,
            &frame_spec,
            scenario_seed(seed, i as u64, true),
        )?);
    }
    let split = DatasetSplit {
        train: (1..n_normal - 1).map(|i| format!("normal-{i}")).collect(),
        threshold: vec!["normal-0".to_string()],
        test: std::iter::once(format!("normal-{}", n_normal - 1))
            .chain((0..n_abnormal).map(|i| format!("abnormal-{i}")))
            .collect(),
    };
    fs::create_dir_all(out)?;
    dio::write_corpus(out, &scenarios, &split)?;
    Ok(split)
}

fn imu_train_config(cfg: &Config, seed: u64) -> Result<ImuTrainConfig> {
    Ok(ImuTrainConfig {
        epochs: cfg.get_usize("imu.epochs")?,
        lr: cfg.get_f64("imu.lr")?,
        decay_epochs: Vec::new(),
        decay_factor: 10.0,
        seed,
    })
}

/// Collects per-scenario training windows after scaling; windows never span
/// scenario boundaries.
fn training_windows(
    corpus: &Path,
    ids: &[String],
    scaler: &ScalerParams,
    mode: WindowMode,
) -> Result<Vec<ImuWindow>> {
    let mut windows = Vec::new();
    for id in ids {
        let (samples, _) = dio::read_imu_stream(corpus, id)?;
        let scaled = scaler.apply_all(&samples);
        windows.extend(make_windows(&scaled, mode)?);
    }
    Ok(windows)
}

/// Trains both IMU detectors on the manifest's train scenarios and writes
/// `imu_autoencoder.ckpt`, `imu_forecaster.ckpt` and the per-epoch loss log.
pub fn stage_train_imu(corpus: &Path, cfg: &Config, seed: u64, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let split = dio::read_manifest(&corpus.join("split.txt"))?;
    let mut all_samples = Vec::new();
    for id in &split.train {
        let (samples, _) = dio::read_imu_stream(corpus, id)?;
        all_samples.extend(samples);
    }
    let scaler = fit_scaler(&all_samples)?;
    let rec_windows = training_windows(corpus, &split.train, &scaler, WindowMode::Reconstruction)?;
    let fc_windows = training_windows(corpus, &split.train, &scaler, WindowMode::Forecast)?;

    let tc = imu_train_config(cfg, seed)?;
    let (autoencoder, ae_losses) = train_autoencoder(&rec_windows, &tc)?;
    let (forecaster, fc_losses) = train_imu_forecaster(&fc_windows, &tc)?;

    let echo = cfg.echo();
    save_checkpoint(
        &out.join("imu_autoencoder.ckpt"),
        ModelKind::ImuAutoencoder,
        &autoencoder,
        Some(&scaler),
        &echo,
    )?;
    save_checkpoint(
        &out.join("imu_forecaster.ckpt"),
        ModelKind::ImuForecaster,
        &forecaster,
        Some(&scaler),
        &echo,
    )?;
    let mut log = String::from("epoch,autoencoder_loss,forecaster_loss\n");
    for (i, (a, f)) in ae_losses.iter().zip(&fc_losses).enumerate() {
        log.push_str(&format!("{i},{a},{f}\n"));
    }
    fs::write(out.join("imu_train_log.csv"), log)?;
    Ok(())
}

/// One row of the persisted vision sequence split.
#[derive(Clone, Debug)]
pub struct VisionSplitRow {
    pub scenario: String,
    pub end_index: usize,
    pub t: f64,
    pub role: String,
    pub label: bool,
}

fn write_vision_split(path: &Path, rows: &[VisionSplitRow]) -> Result<()> {
    let mut out = String::from("scenario,end_index,t,role,label\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenario, r.end_index, r.t, r.role, r.label as u8
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_vision_split(path: &Path) -> Result<Vec<VisionSplitRow>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("scenario,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(PipelineError::MalformedEvents(format!(
                "{}:{}: expected 5 fields",
                path.display(),
                idx + 1
            )));
        }
        rows.push(VisionSplitRow {
            scenario: fields[0].to_string(),
            end_index: fields[1].parse().map_err(|_| {
                PipelineError::MalformedEvents(format!("bad end_index at line {}", idx + 1))
            })?,
            t: fields[2].parse().map_err(|_| {
                PipelineError::MalformedEvents(format!("bad t at line {}", idx + 1))
            })?,
            role: fields[3].to_string(),
            label: fields[4] == "1",
        });
    }
    Ok(rows)
}

fn load_scenarios_for_vision(corpus: &Path, frame_size: usize) -> Result<Vec<Scenario>> {
    let split = dio::read_manifest(&corpus.join("split.txt"))?;
    let mut out = Vec::new();
    for id in split
        .train
        .iter()
        .chain(&split.threshold)
        .chain(&split.test)
    {
        let (frames, frame_labels) = dio::read_frame_stream(corpus, id, frame_size)?;
        out.push(Scenario {
            id: id.clone(),
            kind: scenario_kind(id),
            imu: Vec::new(),
            imu_labels: Vec::new(),
            frames,
            frame_labels,
        });
    }
    Ok(out)
}

/// Rebuilds one sequence from the corpus given a split row.
pub fn load_sequence(
    corpus: &Path,
    frame_size: usize,
    row: &VisionSplitRow,
) -> Result<FrameSequence> {
    let (frames, _) = dio::read_frame_stream(corpus, &row.scenario, frame_size)?;
    if row.end_index >= frames.len() || row.end_index < 3 {
        return Err(PipelineError::MalformedEvents(format!(
            "sequence end {} outside scenario {}",
            row.end_index, row.scenario
        )));
    }
    Ok(FrameSequence::new(
        [
            frames[row.end_index - 3].clone(),
            frames[row.end_index - 2].clone(),
            frames[row.end_index - 1].clone(),
        ],
        frames[row.end_index].clone(),
    )
    .map_err(crate::data::DataError::from)?)
}

/// Three-phase vision training. Writes the frozen codec snapshot, the
/// pre-fine-tune and final forecasters, the discriminator, the sequence
/// split, and the loss log.
pub fn stage_train_vision(corpus: &Path, cfg: &Config, seed: u64, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let frame_size = cfg.get_usize("corpus.frame_size")?;
    let scenarios = load_scenarios_for_vision(corpus, frame_size)?;
    let dataset = build_frame_dataset(
        &scenarios,
        seed ^ 0x5EED_5EED,
        cfg.get_usize("split.vision_threshold")?,
        cfg.get_usize("split.vision_test")?,
    )?;

    let mut rows: Vec<VisionSplitRow> = Vec::new();
    for (role, seqs) in [
        ("train", &dataset.train),
        ("threshold", &dataset.threshold),
        ("test", &dataset.test),
    ] {
        for s in seqs {
            rows.push(VisionSplitRow {
                scenario: s.scenario.clone(),
                end_index: s.end_index,
                t: s.seq.target.t,
                role: role.to_string(),
                label: s.label,
            });
        }
    }
    write_vision_split(&out.join("vision_split.csv"), &rows)?;

    // phase 1: codec reconstruction on the training set's individual frames
    let mut seen = std::collections::BTreeSet::new();
    let mut train_frames: Vec<Frame> = Vec::new();
    for s in &dataset.train {
        for (offset, f) in s
            .seq
            .inputs
            .iter()
            .chain(std::iter::once(&s.seq.target))
            .enumerate()
        {
            if seen.insert((s.scenario.clone(), s.end_index - 3 + offset)) {
                train_frames.push(f.clone());
            }
        }
    }
    let arch = CodecArch::for_scale(frame_size).map_err(crate::data::DataError::from)?;
    let vcfg = VisionTrainConfig {
        epochs: cfg.get_usize("vision.codec_epochs")?,
        lr: cfg.get_f64("vision.lr")?,
        decay_epochs: cfg.get_usize_list("vision.decay_at")?,
        decay_factor: cfg.get_f64("vision.decay_factor")?,
        seed,
        augment: Some(Default::default()),
    };
    let (codec, codec_losses) =
        pretrain_codec(&train_frames, arch.clone(), &vcfg).map_err(crate::data::DataError::from)?;
    let echo = cfg.echo();
    save_checkpoint(&out.join("vision_codec.ckpt"), ModelKind::VisionCodec, &codec, None, &echo)?;

    // phase 2: frozen-codec forecasting
    let seqs: Vec<FrameSequence> = dataset.train.iter().map(|s| s.seq.clone()).collect();
    let fcfg = VisionTrainConfig {
        epochs: cfg.get_usize("vision.forecaster_epochs")?,
        seed,
        augment: None,
        ..vcfg
    };
    let (mut forecaster, fc_losses) =
        train_forecaster(&seqs, codec, &fcfg).map_err(crate::data::DataError::from)?;
    save_checkpoint(
        &out.join("vision_forecaster_pretrained.ckpt"),
        ModelKind::VisionForecaster,
        &forecaster,
        None,
        &echo,
    )?;

    // phase 3: conditional-adversarial fine-tuning
    let cgan_epochs = cfg.get_usize("vision.cgan_epochs")?;
    let mut disc = Discriminator::new(seed, arch);
    let mut cgan_log = String::new();
    if cgan_epochs > 0 {
        let ccfg = CganConfig {
            epochs: cgan_epochs,
            lr: cfg.get_f64("vision.cgan_lr")?,
            lambda_pred: cfg.get_f64("vision.lambda_pred")?,
            lambda_adv: cfg.get_f64("vision.lambda_adv")?,
            seed,
            ..CganConfig::default()
        };
        let hist = cgan_finetune(&mut forecaster, &mut disc, &seqs, &ccfg)
            .map_err(crate::data::DataError::from)?;
        for i in 0..hist.d_loss.len() {
            cgan_log.push_str(&format!(
                "{i},{},{},{}\n",
                hist.d_loss[i], hist.g_adv_loss[i], hist.g_pred_loss[i]
            ));
        }
    }
    save_checkpoint(
        &out.join("vision_forecaster.ckpt"),
        ModelKind::VisionForecaster,
        &forecaster,
        None,
        &echo,
    )?;
    save_checkpoint(
        &out.join("vision_discriminator.ckpt"),
        ModelKind::VisionDiscriminator,
        &disc,
        None,
        &echo,
    )?;

    let mut log = String::from("phase,epoch,loss\n");
    for (i, l) in codec_losses.iter().enumerate() {
        log.push_str(&format!("codec,{i},{l}\n"));
    }
    for (i, l) in fc_losses.iter().enumerate() {
        log.push_str(&format!("forecaster,{i},{l}\n"));
    }
    fs::write(out.join("vision_train_log.csv"), log)?;
    fs::write(
        out.join("cgan_train_log.csv"),
        format!("epoch,d_loss,g_adv_loss,g_pred_loss\n{cgan_log}"),
    )?;
    Ok(())
}

// ── model loading ─────────────────────────────────────────────────────────

pub fn load_imu_autoencoder(path: &Path) -> Result<(AutoencoderModel, ScalerParams)> {
    let raw = load_checkpoint(path)?;
    if raw.kind != ModelKind::ImuAutoencoder {
        return Err(PipelineError::MalformedCheckpoint(format!(
            "expected imu-autoencoder, found {}",
            raw.kind.tag()
        )));
    }
    let scaler = raw.scaler.ok_or_else(|| {
        PipelineError::MalformedCheckpoint("autoencoder checkpoint lacks scaler".into())
    })?;
    let mut model = AutoencoderModel::new(0);
    assign_params(&mut model, raw.tensors)?;
    Ok((model, scaler))
}

pub fn load_imu_forecaster(path: &Path) -> Result<(ForecasterModel, ScalerParams)> {
    let raw = load_checkpoint(path)?;
    if raw.kind != ModelKind::ImuForecaster {
        return Err(PipelineError::MalformedCheckpoint(format!(
            "expected imu-forecaster, found {}",
            raw.kind.tag()
        )));
    }
    let scaler = raw.scaler.ok_or_else(|| {
        PipelineError::MalformedCheckpoint("forecaster checkpoint lacks scaler".into())
    })?;
    let mut model = ForecasterModel::new(0);
    assign_params(&mut model, raw.tensors)?;
    Ok((model, scaler))
}

fn frame_size_from_echo(echo: &str) -> Result<usize> {
    Config::parse(echo)?.get_usize("corpus.frame_size")
}

pub fn load_vision_forecaster(path: &Path) -> Result<CnnLstmForecaster> {
    let raw = load_checkpoint(path)?;
    if raw.kind != ModelKind::VisionForecaster {
        return Err(PipelineError::MalformedCheckpoint(format!(
            "expected vision-forecaster, found {}",
            raw.kind.tag()
        )));
    }
    let size = frame_size_from_echo(&raw.config_echo)?;
    let arch = CodecArch::for_scale(size).map_err(crate::data::DataError::from)?;
    let mut model = CnnLstmForecaster::new(0, ConvCodec::new(0, arch));
    assign_params(&mut model, raw.tensors)?;
    Ok(model)
}

pub fn load_vision_codec(path: &Path) -> Result<ConvCodec> {
    let raw = load_checkpoint(path)?;
    if raw.kind != ModelKind::VisionCodec {
        return Err(PipelineError::MalformedCheckpoint(format!(
            "expected vision-codec, found {}",
            raw.kind.tag()
        )));
    }
    let size = frame_size_from_echo(&raw.config_echo)?;
    let arch = CodecArch::for_scale(size).map_err(crate::data::DataError::from)?;
    let mut model = ConvCodec::new(0, arch);
    assign_params(&mut model, raw.tensors)?;
    Ok(model)
}

// ── calibration ───────────────────────────────────────────────────────────

/// Computes the five calibration error streams from the threshold scenarios.
pub fn calibration_error_streams(
    corpus: &Path,
    models_dir: &Path,
) -> Result<ErrorStreams> {
    let split = dio::read_manifest(&corpus.join("split.txt"))?;
    let (autoencoder, scaler) = load_imu_autoencoder(&models_dir.join("imu_autoencoder.ckpt"))?;
    let (imufc, _) = load_imu_forecaster(&models_dir.join("imu_forecaster.ckpt"))?;
    let mut streams = ErrorStreams::default();
    for id in &split.threshold {
        let (samples, _) = dio::read_imu_stream(corpus, id)?;
        let scaled = scaler.apply_all(&samples);
        for w in make_windows(&scaled, WindowMode::Reconstruction)? {
            let e = reconstruct_error(&autoencoder, &w)?;
            streams.autoencoder_angular.push(e.e_a);
            streams.autoencoder_linear.push(e.e_l);
        }
        for w in make_windows(&scaled, WindowMode::Forecast)? {
            let e = forecast_error(&imufc, &w)?;
            streams.forecaster_angular.push(e.e_a);
            streams.forecaster_linear.push(e.e_l);
        }
    }
    let vis_model = load_vision_forecaster(&models_dir.join("vision_forecaster.ckpt"))?;
    let frame_size = vis_model.input_size();
    let rows = read_vision_split(&models_dir.join("vision_split.csv"))?;
    for row in rows.iter().filter(|r| r.role == "threshold") {
        let seq = load_sequence(corpus, frame_size, row)?;
        let (pred, _) = predict_frame(&vis_model, &seq.inputs)
            .map_err(crate::data::DataError::from)?;
        streams
            .vision
            .push(frame_error(&pred, &seq.target).map_err(crate::data::DataError::from)?);
    }
    Ok(streams)
}

fn write_histogram_csv(
    path: &Path,
    samples: &[f64],
    model: &ErrorDistributionModel,
) -> Result<()> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let bins = 40usize;
    let width = ((hi - lo) / bins as f64).max(1e-300);
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = samples.len() as f64;
    let mut out = String::from("bin_lo,bin_hi,count,density,fitted_pdf_mid\n");
    for (b, &c) in counts.iter().enumerate() {
        let blo = lo + b as f64 * width;
        let bhi = blo + width;
        let mid = 0.5 * (blo + bhi);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            blo,
            bhi,
            c,
            c as f64 / (n * width),
            model.family.pdf(mid)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Fits the five error streams, selects families by KS, writes
/// `thresholds.txt`, per-stream histogram CSVs and a fit summary.
pub fn stage_calibrate(corpus: &Path, models_dir: &Path, cfg: &Config, out: &Path) -> Result<ThresholdSet> {
    fs::create_dir_all(out)?;
    let confidence = cfg.get_f64("calibrate.confidence")?;
    let streams = calibration_error_streams(corpus, models_dir)?;
    let (set, models) = calibrate_thresholds(&streams, confidence, &FamilyKind::ALL)?;
    fs::write(out.join("thresholds.txt"), set.to_kv())?;
    let named: [(&str, &Vec<f64>); 5] = [
        ("autoencoder_angular", &streams.autoencoder_angular),
        ("autoencoder_linear", &streams.autoencoder_linear),
        ("forecaster_angular", &streams.forecaster_angular),
        ("forecaster_linear", &streams.forecaster_linear),
        ("vision", &streams.vision),
    ];
    let mut summary = String::from("stream,family,ks,n,threshold,params\n");
    for ((name, samples), model) in named.iter().zip(&models) {
        write_histogram_csv(&out.join(format!("histogram_{name}.csv")), samples, model)?;
        let params: Vec<String> = model
            .family
            .params()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let threshold = model.family.quantile(confidence)?;
        summary.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            model.family.kind().name(),
            model.ks,
            model.n,
            threshold,
            params.join(";")
        ));
    }
    fs::write(out.join("calibration_summary.csv"), summary)?;
    Ok(set)
}

// ── inference and evaluation ──────────────────────────────────────────────

/// Streams every test scenario through the IMU detectors and scores every
/// held-out test sequence with the vision forecaster; events land in
/// `events-imu-<scenario>.jsonl` and `events-vision.jsonl`.
pub fn stage_infer(
    corpus: &Path,
    models_dir: &Path,
    thresholds_path: &Path,
    out: &Path,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let thresholds = ThresholdSet::from_kv(&fs::read_to_string(thresholds_path)?)
        .map_err(PipelineError::Stats)?;
    let split = dio::read_manifest(&corpus.join("split.txt"))?;
    let (autoencoder, scaler) = load_imu_autoencoder(&models_dir.join("imu_autoencoder.ckpt"))?;
    let (imufc, _) = load_imu_forecaster(&models_dir.join("imu_forecaster.ckpt"))?;

    for id in &split.test {
        let (samples, _) = dio::read_imu_stream(corpus, id)?;
        let period = data::nominal_period(&samples).ok_or_else(|| {
            PipelineError::MalformedEvents(format!("scenario {id} has fewer than 2 samples"))
        })?;
        let mut evaluator = StreamingImuEvaluator::new(
            autoencoder.clone(),
            imufc.clone(),
            scaler,
            thresholds,
            id,
            period,
        );
        let mut events = Vec::with_capacity(samples.len() * 2);
        for s in &samples {
            events.extend(evaluator.push(s)?);
        }
        write_events_jsonl(&out.join(format!("events-imu-{id}.jsonl")), &events)?;
    }

    let vis_model = load_vision_forecaster(&models_dir.join("vision_forecaster.ckpt"))?;
    let frame_size = vis_model.input_size();
    let rows = read_vision_split(&models_dir.join("vision_split.csv"))?;
    let mut vision_events = Vec::new();
    for row in rows.iter().filter(|r| r.role == "test") {
        let seq = load_sequence(corpus, frame_size, row)?;
        let (pred, _) = predict_frame(&vis_model, &seq.inputs)
            .map_err(crate::data::DataError::from)?;
        let e_v = frame_error(&pred, &seq.target).map_err(crate::data::DataError::from)?;
        vision_events.push(FlagEvent {
            stream: row.scenario.clone(),
            t: row.t,
            source: DetectorSource::Vision,
            evaluable: true,
            channels: vec![ChannelFlag::from_error("e_v", e_v, thresholds.vision.threshold)],
        });
    }
    write_events_jsonl(&out.join("events-vision.jsonl"), &vision_events)?;
    Ok(())
}

/// Joins events with ground-truth labels to produce the evaluation report
/// (JSON + rendered table + CSV).
pub fn stage_eval(
    corpus: &Path,
    models_dir: &Path,
    events_dir: &Path,
    out: &Path,
) -> Result<EvalReport> {
    fs::create_dir_all(out)?;
    let split = dio::read_manifest(&corpus.join("split.txt"))?;

    let mut ae_rows = Vec::new();
    let mut fc_rows = Vec::new();
    for id in &split.test {
        let events =
            super::events::read_events_jsonl(&events_dir.join(format!("events-imu-{id}.jsonl")))?;
        let (_, labels) = dio::read_imu_stream(corpus, id)?;
        let abnormal = scenario_kind(id) == ScenarioKind::Abnormal;
        let ae_events: Vec<FlagEvent> = events
            .iter()
            .filter(|e| e.source == DetectorSource::ImuAutoencoder)
            .cloned()
            .collect();
        let fc_events: Vec<FlagEvent> = events
            .iter()
            .filter(|e| e.source == DetectorSource::ImuForecaster)
            .cloned()
            .collect();
        ae_rows.push((id.clone(), abnormal, confusion_for_stream(&ae_events, &labels)?));
        fc_rows.push((id.clone(), abnormal, confusion_for_stream(&fc_events, &labels)?));
    }

    let vision_events = super::events::read_events_jsonl(&events_dir.join("events-vision.jsonl"))?;
    let rows = read_vision_split(&models_dir.join("vision_split.csv"))?;
    let mut vision_rows = Vec::new();
    let mut by_scenario: std::collections::BTreeMap<String, Vec<FlagEvent>> =
        std::collections::BTreeMap::new();
    for e in vision_events {
        by_scenario.entry(e.stream.clone()).or_default().push(e);
    }
    for (scenario, events) in by_scenario {
        let labels: Vec<(f64, bool)> = rows
            .iter()
            .filter(|r| r.role == "test" && r.scenario == scenario)
            .map(|r| (r.t, r.label))
            .collect();
        let abnormal = scenario_kind(&scenario) == ScenarioKind::Abnormal;
        vision_rows.push((
            scenario.clone(),
            abnormal,
            confusion_for_stream(&events, &labels)?,
        ));
    }

    let report = EvalReport {
        detectors: vec![
            detector_report(DetectorSource::ImuAutoencoder, ae_rows),
            detector_report(DetectorSource::ImuForecaster, fc_rows),
            detector_report(DetectorSource::Vision, vision_rows),
        ],
    };
    fs::write(
        out.join("eval.json"),
        serde_json::to_string_pretty(&report).expect("serializable report"),
    )?;
    fs::write(out.join("eval_table.txt"), report.render_table())?;
    fs::write(out.join("report.csv"), report.to_csv())?;
    Ok(report)
}

/// Renders the combined human-readable report from the eval and calibration
/// artifacts.
pub fn stage_report(eval_dir: &Path, calibration_dir: &Path, out: &Path) -> Result<String> {
    fs::create_dir_all(out)?;
    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(eval_dir.join("eval.json"))?)
            .map_err(|e| PipelineError::MalformedEvents(format!("eval.json: {e}")))?;
    let thresholds = fs::read_to_string(calibration_dir.join("thresholds.txt"))?;
    let summary = fs::read_to_string(calibration_dir.join("calibration_summary.csv"))
        .unwrap_or_default();
    let mut text = String::new();
    text.push_str("== calibrated thresholds ==\n");
    text.push_str(&thresholds);
    text.push('\n');
    if !summary.is_empty() {
        text.push_str("== fitted families ==\n");
        text.push_str(&summary);
        text.push('\n');
    }
    text.push_str("== detection metrics ==\n");
    text.push_str(&report.render_table());
    fs::write(out.join("report.txt"), &text)?;
    fs::write(out.join("report.csv"), report.to_csv())?;
    Ok(text)
}

/// Convenience paths for a full pipeline run rooted at one output directory.
pub struct RunPaths {
    pub corpus: PathBuf,
    pub models: PathBuf,
    pub calibration: PathBuf,
    pub events: PathBuf,
    pub eval: PathBuf,
    pub report: PathBuf,
}

impl RunPaths {
    pub fn under(root: &Path) -> RunPaths {
        RunPaths {
            corpus: root.join("corpus"),
            models: root.join("models"),
            calibration: root.join("calibration"),
            events: root.join("events"),
            eval: root.join("eval"),
            report: root.join("report"),
        }
    }
}

/// The full desk pipeline: datagen → train both paths → calibrate → infer →
/// eval. Returns the final report.
pub fn run_full_pipeline(cfg: &Config, seed: u64, root: &Path) -> Result<EvalReport> {
    let paths = RunPaths::under(root);
    stage_datagen(cfg, seed, &paths.corpus)?;
    stage_train_imu(&paths.corpus, cfg, seed, &paths.models)?;
    stage_train_vision(&paths.corpus, cfg, seed, &paths.models)?;
    stage_calibrate(&paths.corpus, &paths.models, cfg, &paths.calibration)?;
    stage_infer(
        &paths.corpus,
        &paths.models,
        &paths.calibration.join("thresholds.txt"),
        &paths.events,
    )?;
    let report = stage_eval(&paths.corpus, &paths.models, &paths.events, &paths.eval)?;
    stage_report(&paths.eval, &paths.calibration, &paths.report)?;
    Ok(report)
}
