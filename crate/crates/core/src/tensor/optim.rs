//! Adaptive-moment optimizer with an epoch-indexed decay schedule.

use super::{Result, Tensor, TensorError};

/// Base rate plus the epochs at which it is divided by `factor`.
#[derive(Clone, Debug, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub decay_epochs: Vec<usize>,
    pub factor: f64,
}

impl LrSchedule {
    pub fn constant(base: f64) -> Self {
        LrSchedule {
            base,
            decay_epochs: Vec::new(),
            factor: 10.0,
        }
    }

    pub fn with_decays(base: f64, decay_epochs: Vec<usize>, factor: f64) -> Self {
        LrSchedule {
            base,
            decay_epochs,
            factor,
        }
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn rate_at(&self, epoch: usize) -> f64 {
        let hits = self.decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.base / self.factor.powi(hits as i32)
    }
}

/// Adam state over an ordered parameter list. Moment buffers are keyed by
/// position, so the caller must pass parameters in the same order each step.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: LrSchedule,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(schedule: LrSchedule, param_sizes: &[usize]) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule,
            step: 0,
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(schedule: LrSchedule, params: &[(String, &Tensor)]) -> Self {
        let sizes: Vec<usize> = params.iter().map(|(_, t)| t.numel()).collect();
        Adam::new(schedule, &sizes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all parameters. `grads[i]` must be the gradient for
    /// `params[i]`; a missing or missized gradient is an error.
    pub fn step(
        &mut self,
        epoch: usize,
        params: &mut [(String, &mut Tensor)],
        grads: &[Option<&[f64]>],
    ) -> Result<()> {
        if grads.len() != params.len() {
            return Err(TensorError::MissingGrad(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let lr = self.schedule.rate_at(epoch);
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, (name, p)) in params.iter_mut().enumerate() {
            let g = grads[i].ok_or_else(|| TensorError::MissingGrad(name.clone()))?;
            if g.len() != p.numel() {
                return Err(TensorError::MissingGrad(format!(
                    "{name}: gradient length {} vs parameter {}",
                    g.len(),
                    p.numel()
                )));
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let data = p.data_mut();
            for j in 0..g.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                data[j] -= lr * m_hat / (v_hat.sqrt() + self.eps);
                if !data[j].is_finite() {
                    return Err(TensorError::NonFinite { op: "adam_step" });
                }
            }
        }
        Ok(())
    }
}
