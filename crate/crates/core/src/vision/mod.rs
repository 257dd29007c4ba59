//! Vision-side detector: a convolutional encoder/decoder (codec) around an
//! LSTM latent predictor, trained in three phases — codec reconstruction,
//! frozen-codec next-frame forecasting, and conditional-adversarial
//! fine-tuning against a sequence discriminator.

mod augment;

pub use augment::{affine_warp, flip_h, random_augment, AugmentConfig};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{
    validate_chain, Activation, BoundConv, ConvLayer, ConvSpec, Dense, LstmLayer, ParamModel,
    SequenceMode,
};
use crate::tensor::optim::{Adam, LrSchedule};
use crate::tensor::{LossKind, Tape, Tensor, TensorError, TensorId};

pub const SEQ_INPUTS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum VisionError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error("frame size {got} does not match configured {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no training frames/sequences")]
    EmptyInput,
    #[error("codec weights changed during the frozen phase")]
    CodecNotFrozen,
    #[error("discriminator collapse at epoch {epoch}: loss {d_loss:.2e} for {patience} consecutive epochs")]
    ModeCollapse {
        epoch: usize,
        d_loss: f64,
        patience: usize,
    },
    #[error("architecture: {0}")]
    Arch(String),
}

pub type Result<T> = std::result::Result<T, VisionError>;

/// Square grayscale frame with pixel values in [−1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub size: usize,
    pub data: Vec<f64>,
    pub t: f64,
}

impl Frame {
    pub fn new(data: Vec<f64>, size: usize, t: f64) -> Result<Self> {
        if data.len() != size * size {
            return Err(VisionError::BadFrame(format!(
                "{} pixels for size {size}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)) {
            return Err(VisionError::BadFrame("pixel outside [-1, 1]".into()));
        }
        Ok(Frame { size, data, t })
    }

    /// Converts 8-bit grayscale to [−1, 1].
    pub fn from_u8(pixels: &[u8], size: usize, t: f64) -> Result<Self> {
        let data = pixels.iter().map(|&p| p as f64 / 127.5 - 1.0).collect();
        Frame::new(data, size, t)
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Three input frames and the frame to predict.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    pub inputs: [Frame; SEQ_INPUTS],
    pub target: Frame,
}

impl FrameSequence {
    pub fn new(inputs: [Frame; SEQ_INPUTS], target: Frame) -> Result<Self> {
        let size = inputs[0].size;
        for f in inputs.iter().chain(std::iter::once(&target)) {
            if f.size != size {
                return Err(VisionError::DimensionMismatch {
                    expected: size,
                    got: f.size,
                });
            }
        }
        Ok(FrameSequence { inputs, target })
    }
}

// ── architectures ─────────────────────────────────────────────────────────

/// Encoder/decoder layer stacks with their validated latent shape.
#[derive(Clone, Debug)]
pub struct CodecArch {
    pub input_size: usize,
    pub enc: Vec<ConvSpec>,
    pub dec: Vec<ConvSpec>,
    pub latent: (usize, usize, usize),
}

fn conv(in_ch: usize, out_ch: usize, stride: usize) -> ConvSpec {
    ConvSpec {
        in_ch,
        out_ch,
        kernel: 3,
        stride,
        pad: 1,
        upsample: 1,
        activation: Activation::LeakyRelu(0.2),
    }
}

fn up_conv(in_ch: usize, out_ch: usize) -> ConvSpec {
    ConvSpec {
        upsample: 2,
        ..conv(in_ch, out_ch, 1)
    }
}

fn tanh_out(spec: ConvSpec) -> ConvSpec {
    ConvSpec {
        activation: Activation::Tanh,
        ..spec
    }
}

impl CodecArch {
    /// 32×32 frames: 7 hidden encoder layers (3 stride-2) to a 4×4×32
    /// latent; the decoder mirrors with nearest-neighbour upsampling.
    pub fn desk() -> Self {
        let enc = vec![
            conv(1, 8, 2),
            conv(8, 16, 1),
            conv(16, 16, 2),
            conv(16, 32, 1),
            conv(32, 32, 2),
            conv(32, 32, 1),
            tanh_out(conv(32, 32, 1)),
        ];
        let dec = vec![
            conv(32, 32, 1),
            up_conv(32, 32),
            conv(32, 16, 1),
            up_conv(16, 16),
            conv(16, 8, 1),
            up_conv(8, 8),
            tanh_out(conv(8, 1, 1)),
        ];
        CodecArch::validated(32, enc, dec).expect("desk architecture chains")
    }

    /// 128×128 frames: nine hidden encoder layers (5 stride-2) to a 4×4×64
    /// latent.
    pub fn paper() -> Self {
        let enc = vec![
            conv(1, 8, 2),
            conv(8, 16, 1),
            conv(16, 16, 2),
            conv(16, 32, 1),
            conv(32, 32, 2),
            conv(32, 64, 1),
            conv(64, 64, 2),
            conv(64, 64, 1),
            tanh_out(conv(64, 64, 2)),
        ];
        let dec = vec![
            up_conv(64, 64),
            conv(64, 64, 1),
            up_conv(64, 64),
            conv(64, 32, 1),
            up_conv(32, 32),
            conv(32, 16, 1),
            up_conv(16, 16),
            up_conv(16, 8),
            tanh_out(conv(8, 1, 1)),
        ];
        CodecArch::validated(128, enc, dec).expect("paper architecture chains")
    }

    pub fn for_scale(input_size: usize) -> Result<Self> {
        match input_size {
            32 => Ok(CodecArch::desk()),
            128 => Ok(CodecArch::paper()),
            other => Err(VisionError::Arch(format!(
                "no codec architecture for input size {other}"
            ))),
        }
    }

    pub fn validated(
        input_size: usize,
        enc: Vec<ConvSpec>,
        dec: Vec<ConvSpec>,
    ) -> Result<Self> {
        let enc_shapes = validate_chain(&enc, (1, input_size, input_size))
            .map_err(|e| VisionError::Arch(format!("encoder chain: {e}")))?;
        let latent = *enc_shapes.last().ok_or(VisionError::Arch("empty encoder".into()))?;
        let dec_shapes = validate_chain(&dec, latent)
            .map_err(|e| VisionError::Arch(format!("decoder chain: {e}")))?;
        let out = *dec_shapes.last().ok_or(VisionError::Arch("empty decoder".into()))?;
        if out != (1, input_size, input_size) {
            return Err(VisionError::Arch(format!(
                "decoder ends at {out:?}, expected (1, {input_size}, {input_size})"
            )));
        }
        Ok(CodecArch {
            input_size,
            enc,
            dec,
            latent,
        })
    }

    pub fn latent_len(&self) -> usize {
        self.latent.0 * self.latent.1 * self.latent.2
    }
}

// ── codec ─────────────────────────────────────────────────────────────────

/// Convolutional encoder/decoder over single frames.
#[derive(Clone)]
pub struct ConvCodec {
    pub arch: CodecArch,
    enc: Vec<ConvLayer>,
    dec: Vec<ConvLayer>,
}

struct BoundStack {
    layers: Vec<BoundConv>,
}

impl BoundStack {
    fn forward(&self, tape: &mut Tape, mut x: TensorId) -> Result<TensorId> {
        for l in &self.layers {
            x = l.forward(tape, x)?;
        }
        Ok(x)
    }
}

fn bind_stack(layers: &[ConvLayer], tape: &mut Tape, train: bool) -> (BoundStack, Vec<TensorId>) {
    let mut ids = Vec::with_capacity(layers.len() * 2);
    let bound = BoundStack {
        layers: layers
            .iter()
            .map(|l| {
                let b = if train {
                    l.bind(tape)
                } else {
                    l.bind_frozen(tape)
                };
                ids.push(b.w);
                ids.push(b.b);
                b
            })
            .collect(),
    };
    (bound, ids)
}

fn stack_params<'a>(prefix: &str, layers: &'a [ConvLayer]) -> Vec<(String, &'a Tensor)> {
    layers
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            vec![
                (format!("{prefix}{i}.w"), &l.w),
                (format!("{prefix}{i}.b"), &l.b),
            ]
        })
        .collect()
}

fn stack_params_mut<'a>(
    prefix: &str,
    layers: &'a mut [ConvLayer],
) -> Vec<(String, &'a mut Tensor)> {
    layers
        .iter_mut()
        .enumerate()
        .flat_map(|(i, l)| {
            vec![
                (format!("{prefix}{i}.w"), &mut l.w),
                (format!("{prefix}{i}.b"), &mut l.b),
            ]
        })
        .collect()
}

impl ParamModel for ConvCodec {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut p = stack_params("enc", &self.enc);
        p.extend(stack_params("dec", &self.dec));
        p
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let (enc, dec) = (&mut self.enc, &mut self.dec);
        let mut p = stack_params_mut("enc", enc);
        p.extend(stack_params_mut("dec", dec));
        p
    }
}

impl ConvCodec {
    pub fn new(seed: u64, arch: CodecArch) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = arch.enc.iter().map(|&s| ConvLayer::new(&mut rng, s)).collect();
        let dec = arch.dec.iter().map(|&s| ConvLayer::new(&mut rng, s)).collect();
        ConvCodec { arch, enc, dec }
    }

    pub fn from_parts(arch: CodecArch, enc: Vec<ConvLayer>, dec: Vec<ConvLayer>) -> Self {
        ConvCodec { arch, enc, dec }
    }

    fn frame_leaf(&self, tape: &mut Tape, frame: &Frame) -> Result<TensorId> {
        if frame.size != self.arch.input_size {
            return Err(VisionError::DimensionMismatch {
                expected: self.arch.input_size,
                got: frame.size,
            });
        }
        let s = self.arch.input_size;
        Ok(tape
            .constant(frame.data.clone(), &[1, s, s])
            .map_err(VisionError::from)?)
    }

    /// Inference-only reconstruction of one frame.
    pub fn reconstruct(&self, frame: &Frame) -> Result<Frame> {
        let mut tape = Tape::new();
        let (enc, _) = bind_stack(&self.enc, &mut tape, false);
        let (dec, _) = bind_stack(&self.dec, &mut tape, false);
        let x = self.frame_leaf(&mut tape, frame)?;
        let z = enc.forward(&mut tape, x)?;
        let y = dec.forward(&mut tape, z)?;
        Frame::new(tape.value(y).to_vec(), frame.size, frame.t)
    }

    /// Inference-only latent for one frame (flattened).
    pub fn encode(&self, frame: &Frame) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (enc, _) = bind_stack(&self.enc, &mut tape, false);
        let x = self.frame_leaf(&mut tape, frame)?;
        let z = enc.forward(&mut tape, x)?;
        Ok(tape.value(z).to_vec())
    }

    fn param_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (_, t) in self.params() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Trains the codec as a single-frame reconstruction task with augmentation.
pub struct VisionTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub seed: u64,
    pub augment: Option<AugmentConfig>,
}

impl Default for VisionTrainConfig {
    fn default() -> Self {
        VisionTrainConfig {
            epochs: 100,
            lr: 1e-3,
            decay_epochs: vec![50, 80],
            decay_factor: 10.0,
            seed: 0,
            augment: Some(AugmentConfig::default()),
        }
    }
}

pub fn pretrain_codec(
    frames: &[Frame],
    arch: CodecArch,
    cfg: &VisionTrainConfig,
) -> Result<(ConvCodec, Vec<f64>)> {
    if frames.is_empty() {
        return Err(VisionError::EmptyInput);
    }
    let mut codec = ConvCodec::new(cfg.seed, arch);
    let schedule = LrSchedule::with_decays(cfg.lr, cfg.decay_epochs.clone(), cfg.decay_factor);
    let mut adam = Adam::for_params(schedule, &codec.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA0A0_A0A0);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &fi in &order {
            let input = match &cfg.augment {
                Some(aug) => random_augment(&frames[fi], &mut rng, aug),
                None => frames[fi].clone(),
            };
            let mut tape = Tape::new();
            let (enc, enc_ids) = bind_stack(&codec.enc, &mut tape, true);
            let (dec, dec_ids) = bind_stack(&codec.dec, &mut tape, true);
            let x = codec.frame_leaf(&mut tape, &input)?;
            let z = enc.forward(&mut tape, x)?;
            let y = dec.forward(&mut tape, z)?;
            let loss = tape.loss(LossKind::MseMae, y, x)?;
            epoch_loss += tape.value(loss)[0];
            let grads = tape.backward(loss)?;
            let ids: Vec<TensorId> = enc_ids.into_iter().chain(dec_ids).collect();
            let gvec: Vec<Option<&[f64]>> = ids.iter().map(|id| grads.get(*id)).collect();
            adam.step(epoch, &mut codec.params_mut(), &gvec)?;
        }
        losses.push(epoch_loss / frames.len() as f64);
    }
    Ok((codec, losses))
}

// ── CNN-LSTM forecaster ───────────────────────────────────────────────────

/// Next-frame predictor: shared codec plus an LSTM over flattened latents
/// whose hidden state is the predicted latent itself (hidden size = latent
/// length, identity projection).
#[derive(Clone)]
pub struct CnnLstmForecaster {
    pub codec: ConvCodec,
    lstm: LstmLayer,
}

impl ParamModel for CnnLstmForecaster {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut p: Vec<(String, &Tensor)> = self
            .codec
            .params()
            .into_iter()
            .map(|(n, t)| (format!("codec.{n}"), t))
            .collect();
        p.push(("lstm.w".into(), &self.lstm.cell.w));
        p.push(("lstm.u".into(), &self.lstm.cell.u));
        p.push(("lstm.b".into(), &self.lstm.cell.b));
        p
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut p: Vec<(String, &mut Tensor)> = self
            .codec
            .params_mut()
            .into_iter()
            .map(|(n, t)| (format!("codec.{n}"), t))
            .collect();
        p.push(("lstm.w".into(), &mut self.lstm.cell.w));
        p.push(("lstm.u".into(), &mut self.lstm.cell.u));
        p.push(("lstm.b".into(), &mut self.lstm.cell.b));
        p
    }
}

impl CnnLstmForecaster {
    pub fn new(seed: u64, codec: ConvCodec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x17E5_17E5);
        let latent = codec.arch.latent_len();
        CnnLstmForecaster {
            codec,
            lstm: LstmLayer::new(&mut rng, latent, latent),
        }
    }

    pub fn from_parts(codec: ConvCodec, lstm: LstmLayer) -> Self {
        CnnLstmForecaster { codec, lstm }
    }

    pub fn input_size(&self) -> usize {
        self.codec.arch.input_size
    }

    /// Builds the prediction graph. `train_codec`/`train_lstm` control which
    /// parameter groups receive gradients. Returns the predicted frame node,
    /// the predicted latent node, and the bound ids of the trainable groups
    /// in `params()` order (codec first, then lstm).
    fn forward(
        &self,
        tape: &mut Tape,
        inputs: &[Frame; SEQ_INPUTS],
        train_codec: bool,
        train_lstm: bool,
    ) -> Result<(TensorId, TensorId, Vec<TensorId>)> {
        let (enc, enc_ids) = bind_stack(&self.codec.enc, tape, train_codec);
        let (dec, dec_ids) = bind_stack(&self.codec.dec, tape, train_codec);
        let lstm_bound = if train_lstm {
            self.lstm.cell.bind(tape)
        } else {
            self.lstm.cell.bind_frozen(tape)
        };
        let latent_len = self.codec.arch.latent_len();
        let mut latents = Vec::with_capacity(SEQ_INPUTS);
        for f in inputs {
            let x = self.codec.frame_leaf(tape, f)?;
            let z = enc.forward(tape, x)?;
            latents.push(tape.reshape(z, &[latent_len, 1])?);
        }
        let out = self.lstm.forward(
            tape,
            &lstm_bound,
            &latents,
            None,
            SequenceMode::ReturnLast,
        )?;
        let pred_latent = out.outputs[0];
        let (c, h, w) = self.codec.arch.latent;
        let z_img = tape.reshape(pred_latent, &[c, h, w])?;
        let pred = dec.forward(tape, z_img)?;
        let mut ids = Vec::new();
        if train_codec {
            ids.extend(enc_ids);
            ids.extend(dec_ids);
        }
        if train_lstm {
            ids.push(lstm_bound.w);
            ids.push(lstm_bound.u);
            ids.push(lstm_bound.b);
        }
        Ok((pred, pred_latent, ids))
    }
}

/// Phase-two training: only the LSTM learns; the codec must come out
/// bit-identical.
pub fn train_forecaster(
    sequences: &[FrameSequence],
    codec: ConvCodec,
    cfg: &VisionTrainConfig,
) -> Result<(CnnLstmForecaster, Vec<f64>)> {
    if sequences.is_empty() {
        return Err(VisionError::EmptyInput);
    }
    let snapshot = codec.param_bytes();
    let mut model = CnnLstmForecaster::new(cfg.seed, codec);
    let schedule = LrSchedule::with_decays(cfg.lr, cfg.decay_epochs.clone(), cfg.decay_factor);
    let lstm_params = vec![
        ("lstm.w".to_string(), model.lstm.cell.w.numel()),
        ("lstm.u".to_string(), model.lstm.cell.u.numel()),
        ("lstm.b".to_string(), model.lstm.cell.b.numel()),
    ];
    let sizes: Vec<usize> = lstm_params.iter().map(|(_, n)| *n).collect();
    let mut adam = Adam::new(schedule, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xF0F0_0F0F);
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &si in &order {
            let seq = &sequences[si];
            let mut tape = Tape::new();
            let (pred, _, ids) = model.forward(&mut tape, &seq.inputs, false, true)?;
            let target = model.codec.frame_leaf(&mut tape, &seq.target)?;
            let loss = tape.loss(LossKind::MseMae, pred, target)?;
            epoch_loss += tape.value(loss)[0];
            let grads = tape.backward(loss)?;
            let gvec: Vec<Option<&[f64]>> = ids.iter().map(|id| grads.get(*id)).collect();
            let mut pm = vec![
                ("lstm.w".to_string(), &mut model.lstm.cell.w),
                ("lstm.u".to_string(), &mut model.lstm.cell.u),
                ("lstm.b".to_string(), &mut model.lstm.cell.b),
            ];
            adam.step(epoch, &mut pm, &gvec)?;
        }
        losses.push(epoch_loss / sequences.len() as f64);
    }
    if model.codec.param_bytes() != snapshot {
        return Err(VisionError::CodecNotFrozen);
    }
    Ok((model, losses))
}

/// Predicts the 4th frame from three inputs; also returns the predicted
/// flattened latent.
pub fn predict_frame(
    model: &CnnLstmForecaster,
    inputs: &[Frame; SEQ_INPUTS],
) -> Result<(Frame, Vec<f64>)> {
    let mut tape = Tape::new();
    let (pred, latent, _) = model.forward(&mut tape, inputs, false, false)?;
    let frame = Frame::new(
        tape.value(pred).to_vec(),
        model.input_size(),
        inputs[SEQ_INPUTS - 1].t,
    )?;
    Ok((frame, tape.value(latent).to_vec()))
}

/// Mean squared pixel difference.
pub fn frame_error(predicted: &Frame, actual: &Frame) -> Result<f64> {
    if predicted.size != actual.size {
        return Err(VisionError::DimensionMismatch {
            expected: actual.size,
            got: predicted.size,
        });
    }
    let n = predicted.data.len() as f64;
    Ok(predicted
        .data
        .iter()
        .zip(&actual.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

// ── discriminator and adversarial fine-tuning ─────────────────────────────

/// Sequence discriminator: its own convolutional encoder (same architecture
/// as the codec encoder), a 4-step LSTM over the four encoded frames, and a
/// dense head to a real/fake probability.
#[derive(Clone)]
pub struct Discriminator {
    arch: CodecArch,
    enc: Vec<ConvLayer>,
    lstm: LstmLayer,
    head: Dense,
}

impl ParamModel for Discriminator {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut p = stack_params("enc", &self.enc);
        p.push(("lstm.w".into(), &self.lstm.cell.w));
        p.push(("lstm.u".into(), &self.lstm.cell.u));
        p.push(("lstm.b".into(), &self.lstm.cell.b));
        p.push(("head.w".into(), &self.head.w));
        p.push(("head.b".into(), &self.head.b));
        p
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut p = stack_params_mut("enc", &mut self.enc);
        p.push(("lstm.w".into(), &mut self.lstm.cell.w));
        p.push(("lstm.u".into(), &mut self.lstm.cell.u));
        p.push(("lstm.b".into(), &mut self.lstm.cell.b));
        p.push(("head.w".into(), &mut self.head.w));
        p.push(("head.b".into(), &mut self.head.b));
        p
    }
}

impl Discriminator {
    pub fn new(seed: u64, arch: CodecArch) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD15C_D15C);
        let enc = arch.enc.iter().map(|&s| ConvLayer::new(&mut rng, s)).collect();
        let latent = arch.latent_len();
        Discriminator {
            arch,
            enc,
            lstm: LstmLayer::new(&mut rng, latent, latent),
            head: Dense::new(&mut rng, latent, 1),
        }
    }

    pub fn from_parts(arch: CodecArch, enc: Vec<ConvLayer>, lstm: LstmLayer, head: Dense) -> Self {
        Discriminator {
            arch,
            enc,
            lstm,
            head,
        }
    }

    pub fn arch(&self) -> &CodecArch {
        &self.arch
    }

    /// Binds all discriminator parameters once per tape; both branches of a
    /// training step must share one binding so gradients accumulate.
    fn bind(&self, tape: &mut Tape, train: bool) -> BoundDiscriminator<'_> {
        let (enc, mut ids) = bind_stack(&self.enc, tape, train);
        let lstm_bound = if train {
            self.lstm.cell.bind(tape)
        } else {
            self.lstm.cell.bind_frozen(tape)
        };
        let head_bound = if train {
            self.head.bind(tape)
        } else {
            self.head.bind_frozen(tape)
        };
        ids.push(lstm_bound.w);
        ids.push(lstm_bound.u);
        ids.push(lstm_bound.b);
        ids.push(head_bound.w);
        ids.push(head_bound.b);
        BoundDiscriminator {
            disc: self,
            enc,
            lstm: lstm_bound,
            head: head_bound,
            param_ids: ids,
        }
    }

    /// Probability that the fourth frame is real; strictly inside (0, 1).
    pub fn discriminate(&self, inputs: &[Frame; SEQ_INPUTS], fourth: &Frame) -> Result<f64> {
        let mut tape = Tape::new();
        let s = self.arch.input_size;
        let f4 = tape
            .constant(fourth.data.clone(), &[1, s, s])
            .map_err(VisionError::from)?;
        let bound = self.bind(&mut tape, false);
        let logit = bound.forward_logit(&mut tape, inputs, f4)?;
        let p = tape.sigmoid(logit)?;
        Ok(tape.value(p)[0])
    }
}

struct BoundDiscriminator<'a> {
    disc: &'a Discriminator,
    enc: BoundStack,
    lstm: crate::nn::BoundLstm,
    head: crate::nn::BoundDense,
    param_ids: Vec<TensorId>,
}

impl BoundDiscriminator<'_> {
    /// Logit for a 4-frame branch whose fourth element is already a tape
    /// node (generated or codec-round-tripped real frame).
    fn forward_logit(
        &self,
        tape: &mut Tape,
        inputs: &[Frame; SEQ_INPUTS],
        fourth: TensorId,
    ) -> Result<TensorId> {
        let arch = &self.disc.arch;
        let latent_len = arch.latent_len();
        let s = arch.input_size;
        let mut latents = Vec::with_capacity(4);
        for f in inputs {
            if f.size != s {
                return Err(VisionError::DimensionMismatch {
                    expected: s,
                    got: f.size,
                });
            }
            let x = tape
                .constant(f.data.clone(), &[1, s, s])
                .map_err(VisionError::from)?;
            let z = self.enc.forward(tape, x)?;
            latents.push(tape.reshape(z, &[latent_len, 1])?);
        }
        let z4 = self.enc.forward(tape, fourth)?;
        latents.push(tape.reshape(z4, &[latent_len, 1])?);
        let out = self.disc.lstm.forward(
            tape,
            &self.lstm,
            &latents,
            None,
            SequenceMode::ReturnLast,
        )?;
        self.head.forward(tape, out.outputs[0]).map_err(Into::into)
    }
}

#[derive(Clone, Debug)]
pub struct CganConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lambda_pred: f64,
    pub lambda_adv: f64,
    pub seed: u64,
    pub collapse_threshold: f64,
    pub collapse_patience: usize,
    /// All forecaster weights update by default; switch off to restrict the
    /// generator step to the LSTM (ablations and the zero-adversarial
    /// equivalence check).
    pub train_codec: bool,
}

impl Default for CganConfig {
    fn default() -> Self {
        CganConfig {
            epochs: 20,
            lr: 3e-5,
            lambda_pred: 100.0,
            lambda_adv: 1.0,
            seed: 0,
            collapse_threshold: 0.01,
            collapse_patience: 10,
            train_codec: true,
        }
    }
}

/// Per-epoch loss traces from adversarial fine-tuning.
#[derive(Clone, Debug, Default)]
pub struct CganHistory {
    pub d_loss: Vec<f64>,
    pub g_adv_loss: Vec<f64>,
    pub g_pred_loss: Vec<f64>,
}

/// Conditional-adversarial fine-tuning: alternating discriminator and
/// generator updates, all forecaster weights unfrozen. The real branch
/// is codec-round-tripped before discrimination so both branches carry the
/// same information loss.
pub fn cgan_finetune(
    model: &mut CnnLstmForecaster,
    disc: &mut Discriminator,
    sequences: &[FrameSequence],
    cfg: &CganConfig,
) -> Result<CganHistory> {
    if sequences.is_empty() {
        return Err(VisionError::EmptyInput);
    }
    let schedule = LrSchedule::constant(cfg.lr);
    let g_sizes: Vec<usize> = if cfg.train_codec {
        model.params().iter().map(|(_, t)| t.numel()).collect()
    } else {
        vec![
            model.lstm.cell.w.numel(),
            model.lstm.cell.u.numel(),
            model.lstm.cell.b.numel(),
        ]
    };
    let mut adam_g = Adam::new(schedule.clone(), &g_sizes);
    let mut adam_d = Adam::for_params(schedule, &disc.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xC6A7_0520);
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut history = CganHistory::default();
    let mut collapse_streak = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut d_sum, mut adv_sum, mut pred_sum) = (0.0, 0.0, 0.0);
        for &si in &order {
            let seq = &sequences[si];

            // discriminator step: push fake → 0, codec-round-tripped real → 1
            {
                let mut tape = Tape::new();
                let (fake, _, _) = model.forward(&mut tape, &seq.inputs, false, false)?;
                let (enc_b, _) = bind_stack(&model.codec.enc, &mut tape, false);
                let (dec_b, _) = bind_stack(&model.codec.dec, &mut tape, false);
                let target = model.codec.frame_leaf(&mut tape, &seq.target)?;
                let real_latent = enc_b.forward(&mut tape, target)?;
                let real_rt = dec_b.forward(&mut tape, real_latent)?;
                let bound_d = disc.bind(&mut tape, true);
                let fake_logit = bound_d.forward_logit(&mut tape, &seq.inputs, fake)?;
                let real_logit = bound_d.forward_logit(&mut tape, &seq.inputs, real_rt)?;
                let l_fake = tape.bce_with_logit(fake_logit, 0.0)?;
                let l_real = tape.bce_with_logit(real_logit, 1.0)?;
                let d_loss = tape.add(l_fake, l_real)?;
                d_sum += tape.value(d_loss)[0];
                let grads = tape.backward(d_loss)?;
                let gvec: Vec<Option<&[f64]>> =
                    bound_d.param_ids.iter().map(|id| grads.get(*id)).collect();
                adam_d.step(epoch, &mut disc.params_mut(), &gvec)?;
            }

            // generator step: prediction loss plus fooling loss
            {
                let mut tape = Tape::new();
                let (pred, _, g_ids) =
                    model.forward(&mut tape, &seq.inputs, cfg.train_codec, true)?;
                let target = model.codec.frame_leaf(&mut tape, &seq.target)?;
                let pred_loss = tape.loss(LossKind::MseMae, pred, target)?;
                let bound_d = disc.bind(&mut tape, false);
                let adv_logit = bound_d.forward_logit(&mut tape, &seq.inputs, pred)?;
                let adv_loss = tape.bce_with_logit(adv_logit, 1.0)?;
                let scaled_pred = tape.scale(pred_loss, cfg.lambda_pred)?;
                let scaled_adv = tape.scale(adv_loss, cfg.lambda_adv)?;
                let total = tape.add(scaled_pred, scaled_adv)?;
                adv_sum += tape.value(adv_loss)[0];
                pred_sum += tape.value(pred_loss)[0];
                let grads = tape.backward(total)?;
                let gvec: Vec<Option<&[f64]>> = g_ids.iter().map(|id| grads.get(*id)).collect();
                let mut g_params: Vec<(String, &mut Tensor)> = if cfg.train_codec {
                    model.params_mut()
                } else {
                    vec![
                        ("lstm.w".to_string(), &mut model.lstm.cell.w),
                        ("lstm.u".to_string(), &mut model.lstm.cell.u),
                        ("lstm.b".to_string(), &mut model.lstm.cell.b),
                    ]
                };
                adam_g.step(epoch, &mut g_params, &gvec)?;
            }
        }
        let n = sequences.len() as f64;
        history.d_loss.push(d_sum / n);
        history.g_adv_loss.push(adv_sum / n);
        history.g_pred_loss.push(pred_sum / n);

        if d_sum / n < cfg.collapse_threshold {
            collapse_streak += 1;
            if collapse_streak >= cfg.collapse_patience {
                return Err(VisionError::ModeCollapse {
                    epoch,
                    d_loss: d_sum / n,
                    patience: cfg.collapse_patience,
                });
            }
        } else {
            collapse_streak = 0;
        }
    }
    Ok(history)
}
