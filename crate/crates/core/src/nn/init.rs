//! Seeded Glorot-uniform initialization.

use rand::Rng;

use crate::tensor::Tensor;

/// Glorot bound √(6/(fan_in + fan_out)).
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Weight tensor drawn uniform in ±√(6/(fan_in+fan_out)), `requires_grad` set.
pub fn glorot_uniform(
    rng: &mut impl Rng,
    fan_in: usize,
    fan_out: usize,
    shape: &[usize],
) -> Tensor {
    let bound = glorot_bound(fan_in, fan_out);
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::param(data, shape).expect("uniform draws are finite")
}
