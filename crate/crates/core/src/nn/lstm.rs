//! Standard LSTM cell (no peepholes) and a sequence layer around it.
//!
//! Gate order is fixed as (input i, forget f, output o, candidate g):
//!   i = σ(Wᵢx + Uᵢh + bᵢ)     f = σ(W_f x + U_f h + b_f)
//!   o = σ(Wₒx + Uₒh + bₒ)     g = tanh(W_g x + U_g h + b_g)
//!   c' = f⊙c + i⊙g            h' = o⊙tanh(c')

use rand::Rng;

use super::init::glorot_uniform;
use crate::tensor::{Result, Tape, Tensor, TensorError, TensorId};

/// LSTM cell parameters. `w` stacks the four input-to-gate blocks as rows
/// `[4·hidden, input]`, `u` the hidden-to-gate blocks `[4·hidden, hidden]`,
/// `b` the biases `[4·hidden, 1]`. The forget block of `b` starts at 1.0.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
}

impl LstmCell {
    pub fn new(rng: &mut impl Rng, input_size: usize, hidden_size: usize) -> Self {
        let mut w_data = Vec::with_capacity(4 * hidden_size * input_size);
        let mut u_data = Vec::with_capacity(4 * hidden_size * hidden_size);
        for _ in 0..4 {
            let wg = glorot_uniform(rng, input_size, hidden_size, &[hidden_size, input_size]);
            w_data.extend_from_slice(wg.data());
            let ug = glorot_uniform(rng, hidden_size, hidden_size, &[hidden_size, hidden_size]);
            u_data.extend_from_slice(ug.data());
        }
        let mut b_data = vec![0.0; 4 * hidden_size];
        for v in &mut b_data[hidden_size..2 * hidden_size] {
            *v = 1.0;
        }
        LstmCell {
            input_size,
            hidden_size,
            w: Tensor::param(w_data, &[4 * hidden_size, input_size]).expect("finite init"),
            u: Tensor::param(u_data, &[4 * hidden_size, hidden_size]).expect("finite init"),
            b: Tensor::param(b_data, &[4 * hidden_size, 1]).expect("finite init"),
        }
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundLstm {
        BoundLstm {
            w: tape.leaf(&self.w),
            u: tape.leaf(&self.u),
            b: tape.leaf(&self.b),
            hidden_size: self.hidden_size,
            input_size: self.input_size,
        }
    }

    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundLstm {
        BoundLstm {
            w: tape.leaf_frozen(&self.w),
            u: tape.leaf_frozen(&self.u),
            b: tape.leaf_frozen(&self.b),
            hidden_size: self.hidden_size,
            input_size: self.input_size,
        }
    }
}

/// Hidden and carry state, both `[hidden, 1]`.
#[derive(Clone, Copy)]
pub struct LstmState {
    pub h: TensorId,
    pub c: TensorId,
}

#[derive(Clone, Copy)]
pub struct BoundLstm {
    pub w: TensorId,
    pub u: TensorId,
    pub b: TensorId,
    hidden_size: usize,
    input_size: usize,
}

impl BoundLstm {
    pub fn zero_state(&self, tape: &mut Tape) -> LstmState {
        LstmState {
            h: tape.zeros(&[self.hidden_size, 1]),
            c: tape.zeros(&[self.hidden_size, 1]),
        }
    }

    /// One cell step.
    pub fn step(&self, tape: &mut Tape, x: TensorId, state: LstmState) -> Result<LstmState> {
        if tape.shape(x) != [self.input_size, 1] {
            return Err(TensorError::ShapeMismatch {
                op: "lstm_step",
                detail: format!(
                    "input {:?}, cell expects [{}, 1]",
                    tape.shape(x),
                    self.input_size
                ),
            });
        }
        let h = self.hidden_size;
        let wx = tape.matmul(self.w, x)?;
        let uh = tape.matmul(self.u, state.h)?;
        let zs = tape.add(wx, uh)?;
        let z = tape.add(zs, self.b)?;
        let zi = tape.slice_rows(z, 0, h)?;
        let zf = tape.slice_rows(z, h, 2 * h)?;
        let zo = tape.slice_rows(z, 2 * h, 3 * h)?;
        let zg = tape.slice_rows(z, 3 * h, 4 * h)?;
        let i = tape.sigmoid(zi)?;
        let f = tape.sigmoid(zf)?;
        let o = tape.sigmoid(zo)?;
        let g = tape.tanh(zg)?;
        let fc = tape.mul(f, state.c)?;
        let ig = tape.mul(i, g)?;
        let c = tape.add(fc, ig)?;
        let tc = tape.tanh(c)?;
        let h_out = tape.mul(o, tc)?;
        Ok(LstmState { h: h_out, c })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceMode {
    ReturnAll,
    ReturnLast,
}

/// Runs an [`LstmCell`] over a sequence of column-vector inputs.
#[derive(Clone, Debug)]
pub struct LstmLayer {
    pub cell: LstmCell,
}

/// Outputs of a layer run: the requested hidden vectors plus the final state
/// for decoder initialization.
pub struct LstmForward {
    pub outputs: Vec<TensorId>,
    pub state: LstmState,
}

impl LstmLayer {
    pub fn new(rng: &mut impl Rng, input_size: usize, hidden_size: usize) -> Self {
        LstmLayer {
            cell: LstmCell::new(rng, input_size, hidden_size),
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundLstm,
        inputs: &[TensorId],
        initial: Option<LstmState>,
        mode: SequenceMode,
    ) -> Result<LstmForward> {
        if inputs.is_empty() {
            return Err(TensorError::InvalidAttr {
                op: "lstm_layer",
                detail: "empty sequence".into(),
            });
        }
        let mut state = initial.unwrap_or_else(|| bound.zero_state(tape));
        let mut outputs = Vec::with_capacity(inputs.len());
        for &x in inputs {
            state = bound.step(tape, x, state)?;
            outputs.push(state.h);
        }
        if mode == SequenceMode::ReturnLast {
            outputs = vec![*outputs.last().expect("non-empty sequence")];
        }
        Ok(LstmForward { outputs, state })
    }
}
