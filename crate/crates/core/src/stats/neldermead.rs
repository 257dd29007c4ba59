//! Derivative-free simplex minimization (Nelder-Mead).

pub struct NelderMead {
    pub max_iter: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iter: 800,
            f_tol: 1e-10,
            x_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const ALPHA: f64 = 1.0; // reflection
const GAMMA: f64 = 2.0; // expansion
const RHO: f64 = 0.5; // contraction
const SIGMA: f64 = 0.5; // shrink

impl NelderMead {
    pub fn minimize(
        &self,
        mut f: impl FnMut(&[f64]) -> f64,
        x0: &[f64],
        step: &[f64],
    ) -> MinimizeResult {
        let n = x0.len();
        let mut evals = 0;
        let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += if step[i] != 0.0 { step[i] } else { 0.1 };
            simplex.push(v);
        }
        let mut fv: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            iterations += 1;
            // order best → worst
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&i, &j| fv[i].total_cmp(&fv[j]));
            let reorder: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
            let refv: Vec<f64> = idx.iter().map(|&i| fv[i]).collect();
            simplex = reorder;
            fv = refv;

            let f_spread = (fv[n] - fv[0]).abs();
            let x_spread = (0..n)
                .map(|d| {
                    simplex
                        .iter()
                        .map(|v| (v[d] - simplex[0][d]).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if f_spread < self.f_tol && x_spread < self.x_tol {
                converged = true;
                break;
            }

            // centroid of all but worst
            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, &x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let reflect: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(&c, &w)| c + ALPHA * (c - w))
                .collect();
            let fr = eval(&reflect, &mut evals);

            if fr < fv[0] {
                let expand: Vec<f64> = centroid
                    .iter()
                    .zip(&worst)
                    .map(|(&c, &w)| c + GAMMA * (c - w))
                    .collect();
                let fe = eval(&expand, &mut evals);
                if fe < fr {
                    simplex[n] = expand;
                    fv[n] = fe;
                } else {
                    simplex[n] = reflect;
                    fv[n] = fr;
                }
            } else if fr < fv[n - 1] {
                simplex[n] = reflect;
                fv[n] = fr;
            } else {
                let contract: Vec<f64> = if fr < fv[n] {
                    centroid
                        .iter()
                        .zip(&reflect)
                        .map(|(&c, &r)| c + RHO * (r - c))
                        .collect()
                } else {
                    centroid
                        .iter()
                        .zip(&worst)
                        .map(|(&c, &w)| c + RHO * (w - c))
                        .collect()
                };
                let fc = eval(&contract, &mut evals);
                if fc < fv[n].min(fr) {
                    simplex[n] = contract;
                    fv[n] = fc;
                } else {
                    // shrink toward best
                    let best = simplex[0].clone();
                    for v in simplex.iter_mut().skip(1) {
                        for (x, &b) in v.iter_mut().zip(&best) {
                            *x = b + SIGMA * (*x - b);
                        }
                    }
                    for i in 1..=n {
                        fv[i] = eval(&simplex[i], &mut evals);
                    }
                }
            }
        }

        let mut best = 0;
        for i in 1..=n {
            if fv[i] < fv[best] {
                best = i;
            }
        }
        MinimizeResult {
            x: simplex[best].clone(),
            f: fv[best],
            iterations,
            evaluations: evals,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let nm = NelderMead {
            max_iter: 4000,
            ..NelderMead::default()
        };
        let r = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn minimizes_quadratic_bowl_in_four_dims() {
        let nm = NelderMead::default();
        let target = [0.3, -1.7, 2.5, 0.0];
        let r = nm.minimize(
            |x| {
                x.iter()
                    .zip(&target)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum()
            },
            &[0.0; 4],
            &[0.25; 4],
        );
        for (got, want) in r.x.iter().zip(&target) {
            assert!((got - want).abs() < 1e-4);
        }
    }

    #[test]
    fn nan_objective_is_treated_as_infinite() {
        let nm = NelderMead::default();
        let r = nm.minimize(
            |x| {
                if x[0] < 0.0 {
                    f64::NAN
                } else {
                    (x[0] - 2.0).powi(2)
                }
            },
            &[1.0],
            &[0.5],
        );
        assert!((r.x[0] - 2.0).abs() < 1e-4);
    }
}
