//! Central finite-difference verification of recorded gradients.
//!
//! Rebuilds the forward graph under small parameter perturbations and
//! compares the numeric derivative against what [`Tape::backward`] reports.

use crate::tensor::{Result, Tape, Tensor, TensorId};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Worst-case disagreement between analytic and numeric gradients.
#[derive(Clone, Copy, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_elements: usize,
}

/// Relative error with a small floor so that near-zero gradients compare on
/// absolute terms.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Checks d(loss)/d(param) for every element of every parameter.
///
/// `build` must construct the scalar loss from leaves recorded for `params`
/// (in order) on the given tape; it is re-invoked ~2·N times for the central
/// differences, so keep the graphs small.
pub fn check_gradients<F>(params: &[Tensor], h: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[TensorId]) -> Result<TensorId>,
{
    let mut track: Vec<Tensor> = params.to_vec();
    for p in &mut track {
        p.requires_grad = true;
    }

    let mut tape = Tape::new();
    let ids: Vec<TensorId> = track.iter().map(|p| tape.leaf(p)).collect();
    let loss = build(&mut tape, &ids)?;
    let grads = tape.backward(loss)?;

    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let ids: Vec<TensorId> = ps.iter().map(|p| t.leaf(p)).collect();
        let l = build(&mut t, &ids)?;
        Ok(t.value(l)[0])
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        n_elements: 0,
    };
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, id) in ids.iter().enumerate() {
        let analytic = grads
            .get(*id)
            .expect("tracked leaf receives a gradient")
            .to_vec();
        for j in 0..work[pi].numel() {
            let orig = work[pi].data()[j];
            work[pi].data_mut()[j] = orig + h;
            let up = eval(&work)?;
            work[pi].data_mut()[j] = orig - h;
            let down = eval(&work)?;
            work[pi].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = rel_error(analytic[j], numeric);
            let abs = (analytic[j] - numeric).abs();
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
            }
            if abs > report.max_abs_error {
                report.max_abs_error = abs;
            }
            report.n_elements += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::LossKind;

    #[test]
    fn detects_a_correct_gradient() {
        let w = Tensor::new(vec![0.3, -0.2, 0.5, 0.7], &[2, 2]).unwrap();
        let report = check_gradients(&[w], DEFAULT_STEP, |tape, ids| {
            let x = tape.constant(vec![0.9, -0.4], &[2, 1])?;
            let y = tape.matmul(ids[0], x)?;
            let z = tape.tanh(y)?;
            let target = tape.constant(vec![0.1, 0.2], &[2, 1])?;
            tape.loss(LossKind::Mse, z, target)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
        assert_eq!(report.n_elements, 4);
    }
}
