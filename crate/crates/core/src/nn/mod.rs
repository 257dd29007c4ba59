//! Reusable layers: dense, LSTM cell/layer, convolution stacks with
//! validated shape chains, and seeded Glorot initialization.

mod conv;
mod init;
mod lstm;

pub use conv::{validate_chain, Activation, BoundConv, ConvLayer, ConvSpec};
pub use init::{glorot_bound, glorot_uniform};
pub use lstm::{BoundLstm, LstmCell, LstmLayer, LstmState, SequenceMode};

use crate::tensor::{Result, Tape, Tensor, TensorError, TensorId};

/// Ordered parameter registry. `params()` and the ids produced by a model's
/// `bind` must follow the same traversal order; the optimizer and the
/// checkpoint format both key on it.
pub trait ParamModel {
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)>;
}

/// Fully connected layer computing `W·x + b` on column vectors.
#[derive(Clone, Debug)]
pub struct Dense {
    pub input_size: usize,
    pub output_size: usize,
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn new(rng: &mut impl rand::Rng, input_size: usize, output_size: usize) -> Self {
        let w = glorot_uniform(rng, input_size, output_size, &[output_size, input_size]);
        let b = {
            let mut t = Tensor::zeros(&[output_size, 1]);
            t.requires_grad = true;
            t
        };
        Dense {
            input_size,
            output_size,
            w,
            b,
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundDense {
        BoundDense {
            w: tape.leaf(&self.w),
            b: tape.leaf(&self.b),
        }
    }

    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundDense {
        BoundDense {
            w: tape.leaf_frozen(&self.w),
            b: tape.leaf_frozen(&self.b),
        }
    }
}

#[derive(Clone, Copy)]
pub struct BoundDense {
    pub w: TensorId,
    pub b: TensorId,
}

impl BoundDense {
    pub fn forward(&self, tape: &mut Tape, x: TensorId) -> Result<TensorId> {
        let y = tape.matmul(self.w, x)?;
        tape.add(y, self.b)
    }
}

/// Feeds one encoded vector to a decoder `times` times, as a sequence whose
/// elements are all the same tape value.
pub fn repeat_vector(v: TensorId, times: usize) -> Vec<TensorId> {
    vec![v; times]
}

/// Stacks column vectors `[n,1]` into a `[t,n]` matrix (row per step).
pub fn stack_steps(tape: &mut Tape, steps: &[TensorId]) -> Result<TensorId> {
    if steps.is_empty() {
        return Err(TensorError::InvalidAttr {
            op: "stack_steps",
            detail: "empty sequence".into(),
        });
    }
    let n = tape.shape(steps[0])[0];
    let mut rows = Vec::with_capacity(steps.len());
    for &s in steps {
        rows.push(tape.reshape(s, &[1, n])?);
    }
    tape.concat(&rows, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_bias_starts_zero_and_weights_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = Dense::new(&mut rng, 6, 128);
        let bound = glorot_bound(6, 128);
        assert!((bound - 0.211_603_684_757_579_49).abs() < 1e-15);
        assert!(d.w.data().iter().all(|v| v.abs() <= bound));
        assert!(d.b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repeated_vector_rows_are_identical() {
        let mut tape = Tape::new();
        let v = tape
            .constant((0..64).map(|i| i as f64 / 64.0).collect(), &[64, 1])
            .unwrap();
        let seq = repeat_vector(v, 3);
        assert_eq!(seq.len(), 3);
        let m = stack_steps(&mut tape, &seq).unwrap();
        assert_eq!(tape.shape(m), &[3, 64]);
        let data = tape.value(m);
        for r in 1..3 {
            assert_eq!(&data[r * 64..(r + 1) * 64], &data[0..64]);
        }
    }
}
