//! Convolution layer specs with construction-time shape-chain validation.

use rand::Rng;

use super::init::glorot_uniform;
use crate::tensor::{conv_out_dim, Result, Tape, Tensor, TensorError, TensorId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Tanh,
    Linear,
}

/// One convolution layer: optional nearest-neighbour upsample, then a
/// `kernel×kernel` convolution with zero padding, bias and activation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    /// Upsample factor applied before the convolution; 1 means none.
    pub upsample: usize,
    pub activation: Activation,
}

impl ConvSpec {
    pub fn output_shape(&self, input: (usize, usize, usize)) -> Result<(usize, usize, usize)> {
        let (c, h, w) = input;
        if c != self.in_ch {
            return Err(TensorError::ShapeMismatch {
                op: "conv_spec",
                detail: format!("input channels {c}, spec expects {}", self.in_ch),
            });
        }
        let (h, w) = (h * self.upsample, w * self.upsample);
        let oh = conv_out_dim(h, self.kernel, self.stride, self.pad).ok_or_else(|| {
            TensorError::ShapeMismatch {
                op: "conv_spec",
                detail: format!("kernel {} too large for height {h}", self.kernel),
            }
        })?;
        let ow = conv_out_dim(w, self.kernel, self.stride, self.pad).ok_or_else(|| {
            TensorError::ShapeMismatch {
                op: "conv_spec",
                detail: format!("kernel {} too large for width {w}", self.kernel),
            }
        })?;
        Ok((self.out_ch, oh, ow))
    }
}

/// Validates that each spec's output feeds the next spec's input, returning
/// the shape after every layer.
pub fn validate_chain(
    specs: &[ConvSpec],
    input: (usize, usize, usize),
) -> Result<Vec<(usize, usize, usize)>> {
    let mut shapes = Vec::with_capacity(specs.len());
    let mut cur = input;
    for spec in specs {
        cur = spec.output_shape(cur)?;
        shapes.push(cur);
    }
    Ok(shapes)
}

#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub spec: ConvSpec,
    pub w: Tensor,
    pub b: Tensor,
}

impl ConvLayer {
    pub fn new(rng: &mut impl Rng, spec: ConvSpec) -> Self {
        let fan_in = spec.in_ch * spec.kernel * spec.kernel;
        let fan_out = spec.out_ch * spec.kernel * spec.kernel;
        let w = glorot_uniform(
            rng,
            fan_in,
            fan_out,
            &[spec.out_ch, spec.in_ch, spec.kernel, spec.kernel],
        );
        let b = {
            let mut t = Tensor::zeros(&[spec.out_ch]);
            t.requires_grad = true;
            t
        };
        ConvLayer { spec, w, b }
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundConv {
        BoundConv {
            spec: self.spec,
            w: tape.leaf(&self.w),
            b: tape.leaf(&self.b),
        }
    }

    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundConv {
        BoundConv {
            spec: self.spec,
            w: tape.leaf_frozen(&self.w),
            b: tape.leaf_frozen(&self.b),
        }
    }
}

#[derive(Clone, Copy)]
pub struct BoundConv {
    pub spec: ConvSpec,
    pub w: TensorId,
    pub b: TensorId,
}

impl BoundConv {
    pub fn forward(&self, tape: &mut Tape, x: TensorId) -> Result<TensorId> {
        let mut cur = x;
        if self.spec.upsample > 1 {
            cur = tape.upsample_nearest(cur, self.spec.upsample)?;
        }
        let y = tape.conv2d(cur, self.w, self.spec.stride, self.spec.pad)?;
        let y = tape.bias_add_chan(y, self.b)?;
        match self.spec.activation {
            Activation::LeakyRelu(slope) => tape.leaky_relu(y, slope),
            Activation::Tanh => tape.tanh(y),
            Activation::Linear => Ok(y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(in_ch: usize, out_ch: usize, stride: usize, upsample: usize) -> ConvSpec {
        ConvSpec {
            in_ch,
            out_ch,
            kernel: 3,
            stride,
            pad: 1,
            upsample,
            activation: Activation::LeakyRelu(0.2),
        }
    }

    #[test]
    fn chain_of_stride_two_layers_halves_spatial_dims() {
        let specs = [spec(1, 8, 2, 1), spec(8, 16, 1, 1), spec(16, 32, 2, 1)];
        let shapes = validate_chain(&specs, (1, 32, 32)).unwrap();
        assert_eq!(shapes, vec![(8, 16, 16), (16, 16, 16), (32, 8, 8)]);
    }

    #[test]
    fn chain_rejects_channel_mismatch() {
        let specs = [spec(1, 8, 2, 1), spec(16, 16, 1, 1)];
        assert!(validate_chain(&specs, (1, 32, 32)).is_err());
    }

    #[test]
    fn layer_forward_shape_matches_spec() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = spec(2, 4, 2, 1);
        let layer = ConvLayer::new(&mut rng, s);
        let mut tape = Tape::new();
        let bound = layer.bind(&mut tape);
        let x = tape.constant(vec![0.1; 2 * 8 * 8], &[2, 8, 8]).unwrap();
        let y = bound.forward(&mut tape, x).unwrap();
        assert_eq!(tape.shape(y), &[4, 4, 4]);
        let expect = s.output_shape((2, 8, 8)).unwrap();
        assert_eq!(tape.shape(y), &[expect.0, expect.1, expect.2]);
    }

    #[test]
    fn upsample_layer_doubles_before_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = spec(4, 2, 1, 2);
        let layer = ConvLayer::new(&mut rng, s);
        let mut tape = Tape::new();
        let bound = layer.bind(&mut tape);
        let x = tape.constant(vec![0.1; 4 * 4 * 4], &[4, 4, 4]).unwrap();
        let y = bound.forward(&mut tape, x).unwrap();
        assert_eq!(tape.shape(y), &[2, 8, 8]);
    }
}
