//! Parametric distribution families fitted to error samples: pdf, log-pdf,
//! CDF, quantile, parameter constraints, and seeded samplers.
//!
//! Parameterizations follow the common (shape, loc, scale) convention:
//! `x = loc + scale·z` with the standardized forms below.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::special::{bessel_k1, gamma_p, norm_cdf, norm_pdf, norm_quantile};
use super::StatsError;

/// A distribution family with fitted parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistributionFamily {
    /// Birnbaum-Saunders (fatigue life): shape c > 0.
    BirnbaumSaunders { c: f64, loc: f64, scale: f64 },
    /// Johnson's SU: a free, b > 0.
    JohnsonSu { a: f64, b: f64, loc: f64, scale: f64 },
    /// Normal inverse Gaussian: tail a > 0, skew |b| < a.
    NormalInverseGaussian { a: f64, b: f64, loc: f64, scale: f64 },
    Normal { mean: f64, std: f64 },
    Gamma { shape: f64, loc: f64, scale: f64 },
}

/// Identifies a family before fitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FamilyKind {
    BirnbaumSaunders,
    JohnsonSu,
    NormalInverseGaussian,
    Normal,
    Gamma,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::BirnbaumSaunders,
        FamilyKind::JohnsonSu,
        FamilyKind::NormalInverseGaussian,
        FamilyKind::Normal,
        FamilyKind::Gamma,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::BirnbaumSaunders => "birnbaum-saunders",
            FamilyKind::JohnsonSu => "johnson-su",
            FamilyKind::NormalInverseGaussian => "normal-inverse-gaussian",
            FamilyKind::Normal => "normal",
            FamilyKind::Gamma => "gamma",
        }
    }

    pub fn from_name(s: &str) -> Option<FamilyKind> {
        FamilyKind::ALL.iter().copied().find(|k| k.name() == s)
    }

    pub fn param_count(&self) -> usize {
        match self {
            FamilyKind::Normal => 2,
            FamilyKind::BirnbaumSaunders | FamilyKind::Gamma => 3,
            FamilyKind::JohnsonSu | FamilyKind::NormalInverseGaussian => 4,
        }
    }

    /// Fixed ordering used as the final tie-break in model selection.
    pub fn order_index(&self) -> usize {
        FamilyKind::ALL
            .iter()
            .position(|k| k == self)
            .expect("member of ALL")
    }
}

impl DistributionFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            DistributionFamily::BirnbaumSaunders { .. } => FamilyKind::BirnbaumSaunders,
            DistributionFamily::JohnsonSu { .. } => FamilyKind::JohnsonSu,
            DistributionFamily::NormalInverseGaussian { .. } => FamilyKind::NormalInverseGaussian,
            DistributionFamily::Normal { .. } => FamilyKind::Normal,
            DistributionFamily::Gamma { .. } => FamilyKind::Gamma,
        }
    }

    /// Parameter constraint check: scales positive, shape domains respected.
    pub fn validate(&self) -> Result<(), StatsError> {
        let ok = match *self {
            DistributionFamily::BirnbaumSaunders { c, scale, .. } => c > 0.0 && scale > 0.0,
            DistributionFamily::JohnsonSu { b, scale, .. } => b > 0.0 && scale > 0.0,
            DistributionFamily::NormalInverseGaussian { a, b, scale, .. } => {
                a > 0.0 && b.abs() < a && scale > 0.0
            }
            DistributionFamily::Normal { std, .. } => std > 0.0,
            DistributionFamily::Gamma { shape, scale, .. } => shape > 0.0 && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(StatsError::InvalidParams(format!("{self:?}")))
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            DistributionFamily::BirnbaumSaunders { c, loc, scale } => {
                vec![("c", c), ("loc", loc), ("scale", scale)]
            }
            DistributionFamily::JohnsonSu { a, b, loc, scale } => {
                vec![("a", a), ("b", b), ("loc", loc), ("scale", scale)]
            }
            DistributionFamily::NormalInverseGaussian { a, b, loc, scale } => {
                vec![("a", a), ("b", b), ("loc", loc), ("scale", scale)]
            }
            DistributionFamily::Normal { mean, std } => vec![("mean", mean), ("std", std)],
            DistributionFamily::Gamma { shape, loc, scale } => {
                vec![("shape", shape), ("loc", loc), ("scale", scale)]
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            DistributionFamily::BirnbaumSaunders { c, loc, scale } => {
                let z = (x - loc) / scale;
                if z <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                // (z+1)/(2c√(2πz³)) · exp(−(z−1)²/(2zc²))
                (z + 1.0).ln() - (2.0 * c).ln() - 0.5 * (2.0 * PI * z * z * z).ln()
                    - (z - 1.0) * (z - 1.0) / (2.0 * z * c * c)
                    - scale.ln()
            }
            DistributionFamily::JohnsonSu { a, b, loc, scale } => {
                let z = (x - loc) / scale;
                let u = a + b * z.asinh();
                b.ln() - 0.5 * (z * z + 1.0).ln() + norm_pdf(u).ln() - scale.ln()
            }
            DistributionFamily::NormalInverseGaussian { a, b, loc, scale } => {
                let z = (x - loc) / scale;
                let gamma = (a * a - b * b).sqrt();
                let q = (1.0 + z * z).sqrt();
                // a·K₁(a·q)/(π·q) · exp(γ + b·z)
                a.ln() + bessel_k1(a * q).ln() - PI.ln() - q.ln() + gamma + b * z - scale.ln()
            }
            DistributionFamily::Normal { mean, std } => {
                let z = (x - mean) / std;
                norm_pdf(z).ln() - std.ln()
            }
            DistributionFamily::Gamma { shape, loc, scale } => {
                let z = (x - loc) / scale;
                if z <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                (shape - 1.0) * z.ln() - z - super::special::ln_gamma(shape) - scale.ln()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            DistributionFamily::BirnbaumSaunders { c, loc, scale } => {
                let z = (x - loc) / scale;
                if z <= 0.0 {
                    return 0.0;
                }
                norm_cdf((z.sqrt() - (1.0 / z).sqrt()) / c)
            }
            DistributionFamily::JohnsonSu { a, b, loc, scale } => {
                let z = (x - loc) / scale;
                norm_cdf(a + b * z.asinh())
            }
            DistributionFamily::NormalInverseGaussian { .. } => self.nig_cdf_numeric(x),
            DistributionFamily::Normal { mean, std } => norm_cdf((x - mean) / std),
            DistributionFamily::Gamma { shape, loc, scale } => {
                let z = (x - loc) / scale;
                if z <= 0.0 {
                    return 0.0;
                }
                gamma_p(shape, z)
            }
        }
    }

    /// p-quantile. Closed forms where they exist (BS, JSU, Normal);
    /// numerical CDF inversion by bisection otherwise (NIG, Gamma).
    pub fn quantile(&self, p: f64) -> Result<f64, StatsError> {
        if !(0.0 < p && p < 1.0) {
            return Err(StatsError::InvalidQuantileProb(p));
        }
        let z = norm_quantile(p);
        Ok(match *self {
            DistributionFamily::BirnbaumSaunders { c, loc, scale } => {
                // x = loc + scale·¼·(cz + √(c²z² + 4))²
                let t = c * z + (c * c * z * z + 4.0).sqrt();
                loc + scale * 0.25 * t * t
            }
            DistributionFamily::JohnsonSu { a, b, loc, scale } => {
                loc + scale * ((z - a) / b).sinh()
            }
            DistributionFamily::Normal { mean, std } => mean + std * z,
            DistributionFamily::NormalInverseGaussian { .. }
            | DistributionFamily::Gamma { .. } => self.quantile_bisect(p)?,
        })
    }

    /// Support bounds wide enough that the tail mass outside is negligible;
    /// used by the numerical CDF, quantile bracketing and the pdf-mass check.
    pub fn support_hint(&self) -> (f64, f64) {
        match *self {
            DistributionFamily::BirnbaumSaunders { c, loc, scale } => {
                // quantiles of Φ⁻¹ = ±9 through the closed form
                let t = 9.0 * c + (81.0 * c * c + 4.0).sqrt();
                (loc, loc + scale * 0.25 * t * t)
            }
            DistributionFamily::JohnsonSu { a, b, loc, scale } => {
                let lo = loc + scale * ((-9.0 - a) / b).sinh();
                let hi = loc + scale * ((9.0 - a) / b).sinh();
                (lo, hi)
            }
            DistributionFamily::NormalInverseGaussian { a, b, loc, scale } => {
                let gamma = (a * a - b * b).sqrt();
                let mean_z = b / gamma;
                let spread = 50.0 / (a - b.abs()) + 10.0 + 2.0 * mean_z.abs();
                (loc - scale * spread, loc + scale * spread)
            }
            DistributionFamily::Normal { mean, std } => (mean - 9.0 * std, mean + 9.0 * std),
            DistributionFamily::Gamma { shape, loc, scale } => {
                let hi = shape + 40.0 * shape.sqrt().max(1.0) + 40.0;
                (loc, loc + scale * hi)
            }
        }
    }

    /// Interior split points for quadrature, so an adaptive pass cannot step
    /// over a density spike that is narrow relative to the support.
    fn quadrature_anchors(&self) -> Vec<f64> {
        let (lo, hi) = self.support_hint();
        let zs = [-8.0, -5.0, -3.0, -1.5, 0.0, 1.5, 3.0, 5.0, 8.0];
        let mut pts: Vec<f64> = match *self {
            DistributionFamily::BirnbaumSaunders { c, loc, scale } => zs
                .iter()
                .map(|&z| {
                    let t = c * z + (c * c * z * z + 4.0).sqrt();
                    loc + scale * 0.25 * t * t
                })
                .collect(),
            DistributionFamily::JohnsonSu { a, b, loc, scale } => zs
                .iter()
                .map(|&z| loc + scale * ((z - a) / b).sinh())
                .collect(),
            DistributionFamily::Normal { mean, std } => {
                zs.iter().map(|&z| mean + std * z).collect()
            }
            DistributionFamily::NormalInverseGaussian { a, b, loc, scale } => {
                let gamma = (a * a - b * b).sqrt();
                let mean_z = b / gamma;
                let std_z = (a * a / (gamma * gamma * gamma)).sqrt();
                zs.iter().map(|&z| loc + scale * (mean_z + std_z * z)).collect()
            }
            DistributionFamily::Gamma { shape, loc, scale } => {
                let std_z = shape.sqrt();
                zs.iter()
                    .map(|&z| loc + scale * (shape + std_z * z))
                    .collect()
            }
        };
        pts.push(lo);
        pts.push(hi);
        pts.retain(|p| p.is_finite() && *p >= lo && *p <= hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// ∫ pdf over [support-left, x] by piecewise adaptive quadrature.
    fn integrate_pdf_to(&self, x: f64) -> f64 {
        let anchors = self.quadrature_anchors();
        let lo = anchors[0];
        if x <= lo {
            return 0.0;
        }
        let mut mass = 0.0;
        let mut prev = lo;
        for &p in &anchors[1..] {
            let seg_hi = p.min(x);
            if seg_hi > prev {
                mass += adaptive_simpson(&|t| self.pdf(t), prev, seg_hi, 1e-11, 24);
                prev = seg_hi;
            }
            if prev >= x {
                break;
            }
        }
        if x > prev {
            mass += adaptive_simpson(&|t| self.pdf(t), prev, x, 1e-11, 24);
        }
        mass
    }

    /// NIG CDF by adaptive quadrature of the pdf from the far-left support
    /// point.
    fn nig_cdf_numeric(&self, x: f64) -> f64 {
        let (_, hi) = self.support_hint();
        if x >= hi {
            return self.integrate_pdf_to(hi).min(1.0);
        }
        self.integrate_pdf_to(x).clamp(0.0, 1.0)
    }

    fn quantile_bisect(&self, p: f64) -> Result<f64, StatsError> {
        let (mut lo, mut hi) = self.support_hint();
        let (flo, fhi) = (self.cdf(lo), self.cdf(hi));
        if !(flo <= p && p <= fhi) {
            return Err(StatsError::QuantileBracket(p));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break; // f64 exhausted
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-8 * (1.0 + mid.abs()) * 1e-4 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Numerical check that the pdf integrates to 1 over the support.
    pub fn pdf_mass(&self) -> f64 {
        let (_, hi) = self.support_hint();
        self.integrate_pdf_to(hi)
    }

    /// Seeded sampler (used by fitting oracles and the family-recovery
    /// tests; independent of the CDF/quantile paths).
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        match *self {
            DistributionFamily::BirnbaumSaunders { c, loc, scale } => {
                let t = c * n + (c * c * n * n + 4.0).sqrt();
                loc + scale * 0.25 * t * t
            }
            DistributionFamily::JohnsonSu { a, b, loc, scale } => {
                loc + scale * ((n - a) / b).sinh()
            }
            DistributionFamily::Normal { mean, std } => mean + std * n,
            DistributionFamily::NormalInverseGaussian { a, b, loc, scale } => {
                // normal variance-mean mixture with an inverse-Gaussian
                // mixing variable (Michael-Schucany-Haas sampling)
                let gamma = (a * a - b * b).sqrt();
                let m = 1.0 / gamma;
                let y = n * n;
                let x1 = m + m * m * y / 2.0 - (m / 2.0) * (4.0 * m * y + m * m * y * y).sqrt();
                let u: f64 = rng.random();
                let v = if u <= m / (m + x1) { x1 } else { m * m / x1 };
                let n2: f64 = StandardNormal.sample(rng);
                loc + scale * (b * v + v.sqrt() * n2)
            }
            DistributionFamily::Gamma { shape, loc, scale } => {
                loc + scale * gamma_sample(rng, shape)
            }
        }
    }
}

/// Marsaglia-Tsang gamma sampler (shape > 0, unit scale).
fn gamma_sample(rng: &mut impl Rng, shape: f64) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random();
        return gamma_sample(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let v = (1.0 + c * x).powi(3);
        if v <= 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_rec(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, c, fa, fc, fd, left, tol * 0.5, depth - 1)
            + simpson_rec(f, c, b, fc, fb, fe, right, tol * 0.5, depth - 1)
    }
}
