//! Binary checkpoint format: magic "ADRF", version, model kind tag, named
//! little-endian f64 parameter tensors, optional scaler params, and a config
//! echo. Round-trips are bit-exact.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::PipelineError;
use crate::data::ScalerParams;
use crate::imu::FEATURES;
use crate::nn::ParamModel;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ADRF";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    ImuAutoencoder,
    ImuForecaster,
    VisionCodec,
    VisionForecaster,
    VisionDiscriminator,
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::ImuAutoencoder => "imu-autoencoder",
            ModelKind::ImuForecaster => "imu-forecaster",
            ModelKind::VisionCodec => "vision-codec",
            ModelKind::VisionForecaster => "vision-forecaster",
            ModelKind::VisionDiscriminator => "vision-discriminator",
        }
    }

    pub fn from_tag(tag: &str) -> Option<ModelKind> {
        [
            ModelKind::ImuAutoencoder,
            ModelKind::ImuForecaster,
            ModelKind::VisionCodec,
            ModelKind::VisionForecaster,
            ModelKind::VisionDiscriminator,
        ]
        .into_iter()
        .find(|k| k.tag() == tag)
    }
}

/// Decoded checkpoint before model reconstruction.
#[derive(Debug)]
pub struct RawCheckpoint {
    pub kind: ModelKind,
    pub tensors: Vec<(String, Tensor)>,
    pub scaler: Option<ScalerParams>,
    pub config_echo: String,
}

pub fn save_checkpoint(
    path: &Path,
    kind: ModelKind,
    model: &dyn ParamModel,
    scaler: Option<&ScalerParams>,
    config_echo: &str,
) -> Result<(), PipelineError> {
    let params = model.params();
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let tag = kind.tag().as_bytes();
    out.push(tag.len() as u8);
    out.extend_from_slice(tag);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in &params {
        let nb = name.as_bytes();
        out.extend_from_slice(&(nb.len() as u16).to_le_bytes());
        out.extend_from_slice(nb);
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    match scaler {
        Some(s) => {
            out.push(1);
            out.extend_from_slice(&(FEATURES as u32).to_le_bytes());
            for d in 0..FEATURES {
                out.extend_from_slice(&s.min[d].to_le_bytes());
                out.extend_from_slice(&s.max[d].to_le_bytes());
            }
        }
        None => out.push(0),
    }
    let echo = config_echo.as_bytes();
    out.extend_from_slice(&(echo.len() as u32).to_le_bytes());
    out.extend_from_slice(echo);
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    context: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PipelineError> {
        if self.pos + n > self.data.len() {
            return Err(PipelineError::TruncatedCheckpoint {
                context: self.context.clone(),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, PipelineError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, PipelineError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, PipelineError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, PipelineError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<RawCheckpoint, PipelineError> {
    let mut data = Vec::new();
    fs::File::open(path)?.read_to_end(&mut data)?;
    let mut r = Reader {
        data: &data,
        pos: 0,
        context: "header".into(),
    };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(PipelineError::BadMagic {
            found: magic.to_vec(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(PipelineError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let tag_len = r.u8()? as usize;
    let tag = String::from_utf8(r.take(tag_len)?.to_vec())
        .map_err(|_| PipelineError::MalformedCheckpoint("non-utf8 kind tag".into()))?;
    let kind = ModelKind::from_tag(&tag)
        .ok_or_else(|| PipelineError::MalformedCheckpoint(format!("unknown kind {tag:?}")))?;
    let n_tensors = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        r.context = "tensor name".into();
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| PipelineError::MalformedCheckpoint("non-utf8 tensor name".into()))?;
        r.context = name.clone();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(PipelineError::MalformedCheckpoint(format!(
                "{name}: rank {rank}"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(r.f64()?);
        }
        let tensor = Tensor::new(data, &shape)
            .map_err(|e| PipelineError::MalformedCheckpoint(format!("{name}: {e}")))?;
        tensors.push((name, tensor));
    }
    r.context = "scaler".into();
    let scaler = match r.u8()? {
        0 => None,
        1 => {
            let n = r.u32()? as usize;
            if n != FEATURES {
                return Err(PipelineError::MalformedCheckpoint(format!(
                    "scaler feature count {n}"
                )));
            }
            let mut min = [0.0; FEATURES];
            let mut max = [0.0; FEATURES];
            for d in 0..FEATURES {
                min[d] = r.f64()?;
                max[d] = r.f64()?;
            }
            Some(ScalerParams { min, max })
        }
        other => {
            return Err(PipelineError::MalformedCheckpoint(format!(
                "scaler flag {other}"
            )))
        }
    };
    r.context = "config echo".into();
    let echo_len = r.u32()? as usize;
    let config_echo = String::from_utf8(r.take(echo_len)?.to_vec())
        .map_err(|_| PipelineError::MalformedCheckpoint("non-utf8 config echo".into()))?;
    Ok(RawCheckpoint {
        kind,
        tensors,
        scaler,
        config_echo,
    })
}

/// Overwrites a freshly constructed model's parameters with checkpoint
/// tensors, verifying names and shapes positionally.
pub fn assign_params<M: ParamModel>(
    model: &mut M,
    tensors: Vec<(String, Tensor)>,
) -> Result<(), PipelineError> {
    let mut slots = model.params_mut();
    if slots.len() != tensors.len() {
        return Err(PipelineError::MalformedCheckpoint(format!(
            "expected {} tensors, checkpoint has {}",
            slots.len(),
            tensors.len()
        )));
    }
    for ((name, slot), (tname, mut t)) in slots.iter_mut().zip(tensors) {
        if *name != tname {
            return Err(PipelineError::MalformedCheckpoint(format!(
                "tensor {tname:?} where {name:?} expected"
            )));
        }
        if slot.shape() != t.shape() {
            return Err(PipelineError::MalformedCheckpoint(format!(
                "{name}: shape {:?} vs expected {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        t.requires_grad = true;
        **slot = t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imu::AutoencoderModel;

    fn tempfile(tag: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("adrf-ckpt-{tag}-{}.bin", std::process::id()))
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let model = AutoencoderModel::new(77);
        let scaler = ScalerParams {
            min: [-1.0, -2.0, -3.0, -4.0, -5.0, -6.0],
            max: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        let path = tempfile("roundtrip");
        save_checkpoint(
            &path,
            ModelKind::ImuAutoencoder,
            &model,
            Some(&scaler),
            "imu.epochs = 500\n",
        )
        .unwrap();
        let raw = load_checkpoint(&path).unwrap();
        assert_eq!(raw.kind, ModelKind::ImuAutoencoder);
        assert_eq!(raw.scaler, Some(scaler));
        assert_eq!(raw.config_echo, "imu.epochs = 500\n");
        let mut restored = AutoencoderModel::new(0);
        assign_params(&mut restored, raw.tensors).unwrap();
        for ((_, a), (_, b)) in model.params().iter().zip(restored.params().iter()) {
            assert_eq!(a.data(), b.data());
            assert_eq!(a.shape(), b.shape());
        }
    }

    #[test]
    fn bad_magic_is_distinct_error() {
        let path = tempfile("magic");
        fs::write(&path, b"XXXX rest of file").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(PipelineError::BadMagic { .. })
        ));
    }

    #[test]
    fn version_mismatch_is_distinct_error() {
        let path = tempfile("version");
        let mut data = Vec::new();
        data.extend_from_slice(MAGIC);
        data.extend_from_slice(&99u32.to_le_bytes());
        fs::write(&path, data).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(PipelineError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn truncation_names_the_tensor() {
        let model = AutoencoderModel::new(1);
        let path = tempfile("trunc");
        save_checkpoint(&path, ModelKind::ImuAutoencoder, &model, None, "").unwrap();
        let full = fs::read(&path).unwrap();
        fs::write(&path, &full[..200]).unwrap();
        match load_checkpoint(&path) {
            Err(PipelineError::TruncatedCheckpoint { context }) => {
                assert_eq!(context, "enc1.w", "truncation context: {context}");
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_kind_dispatch_is_caught_by_names() {
        use crate::imu::ForecasterModel;
        let model = AutoencoderModel::new(5);
        let path = tempfile("kind");
        save_checkpoint(&path, ModelKind::ImuAutoencoder, &model, None, "").unwrap();
        let raw = load_checkpoint(&path).unwrap();
        let mut wrong = ForecasterModel::new(0);
        assert!(assign_params(&mut wrong, raw.tensors).is_err());
    }
}
