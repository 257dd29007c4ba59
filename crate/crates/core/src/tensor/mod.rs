//! Dense f64 tensors and a recorded computation graph with reverse-mode
//! differentiation.
//!
//! Every model in the crate is built on [`Tape`]: a training step records
//! forward operations onto a fresh tape, calls [`Tape::backward`] on a scalar
//! loss, and feeds the resulting gradients to [`optim::Adam`]. Tapes are
//! discarded after each step.

mod ops;
mod tape;

pub mod optim;

pub use ops::conv_out_dim;
pub use tape::{Gradients, LossKind, Tape, TensorId};

use std::rc::Rc;

/// Errors raised by tensor construction, recorded operations and backward.
#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("invalid attribute for {op}: {detail}")]
    InvalidAttr { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    LossNotScalar(Vec<usize>),
    #[error("binary cross-entropy input outside (0, 1)")]
    BceDomain,
    #[error("gradient missing for parameter {0}")]
    MissingGrad(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// A dense row-major f64 tensor. Parameters and inputs live outside the tape
/// as `Tensor`s; [`Tape::leaf`] shares their storage without copying.
#[derive(Clone, Debug)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Rc<Vec<f64>>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if data.len() != numel || shape.iter().any(|&d| d == 0) {
            return Err(TensorError::ShapeMismatch {
                op: "tensor",
                detail: format!("data length {} vs shape {:?}", data.len(), shape),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite { op: "tensor" });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: Rc::new(data),
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: Rc::new(vec![0.0; numel]),
            requires_grad: false,
            grad: None,
        }
    }

    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        let mut t = Tensor::new(data, shape)?;
        t.requires_grad = true;
        Ok(t)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::new(vec![v], &[1]).expect("finite scalar")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn storage(&self) -> Rc<Vec<f64>> {
        Rc::clone(&self.data)
    }

    /// Mutable view of the storage, copying only if it is shared with a tape.
    pub fn data_mut(&mut self) -> &mut [f64] {
        Rc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn from_storage(data: Rc<Vec<f64>>, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(TensorError::ShapeMismatch {
                op: "tensor",
                detail: format!("data length {} vs shape {:?}", data.len(), shape),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_rejects_length_mismatch() {
        assert!(Tensor::new(vec![1.0, 2.0, 3.0], &[2, 2]).is_err());
    }

    #[test]
    fn tensor_rejects_non_finite() {
        assert!(Tensor::new(vec![1.0, f64::NAN], &[2]).is_err());
        assert!(Tensor::new(vec![f64::INFINITY], &[1]).is_err());
    }

    #[test]
    fn data_mut_does_not_alias_tape_storage() {
        let mut t = Tensor::new(vec![1.0, 2.0], &[2]).unwrap();
        let shared = t.storage();
        t.data_mut()[0] = 9.0;
        assert_eq!(shared[0], 1.0);
        assert_eq!(t.data()[0], 9.0);
    }
}
