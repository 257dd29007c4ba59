//! Maximum-likelihood fitting, Kolmogorov-Smirnov selection, and right-tail
//! threshold calibration.

use super::family::{DistributionFamily, FamilyKind};
use super::neldermead::NelderMead;
use super::StatsError;

/// Minimum sample count for a fit or calibration stream.
pub const MIN_FIT_SAMPLES: usize = 30;

/// A fitted family with its goodness-of-fit statistic.
#[derive(Clone, Copy, Debug)]
pub struct ErrorDistributionModel {
    pub family: DistributionFamily,
    /// Kolmogorov-Smirnov statistic against the fitting samples.
    pub ks: f64,
    pub n: usize,
}

struct SampleStats {
    n: usize,
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
    median: f64,
}

fn sample_stats(samples: &[f64]) -> Result<SampleStats, StatsError> {
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteSamples);
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(StatsError::DegenerateSamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SampleStats {
        n,
        mean,
        std: var.sqrt(),
        min: sorted[0],
        max: sorted[n - 1],
        median: sorted[n / 2],
    })
}

/// Fits one family to the samples by maximum likelihood (Nelder-Mead on
/// unconstrained transforms, moment-based starting points; Normal in closed
/// form) and attaches the KS statistic.
pub fn fit_family(samples: &[f64], kind: FamilyKind) -> Result<ErrorDistributionModel, StatsError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(StatsError::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    let stats = sample_stats(samples)?;
    let family = match kind {
        FamilyKind::Normal => DistributionFamily::Normal {
            mean: stats.mean,
            std: stats.std,
        },
        _ => fit_mle(samples, kind, &stats)?,
    };
    family.validate()?;
    let mass = family.pdf_mass();
    if (mass - 1.0).abs() > 1e-3 {
        return Err(StatsError::NonConvergence {
            family: kind.name(),
            detail: format!("fitted pdf mass {mass:.6} deviates from 1"),
        });
    }
    let ks = ks_statistic(samples, &family);
    Ok(ErrorDistributionModel {
        family,
        ks,
        n: stats.n,
    })
}

/// Margin keeping a fitted location parameter strictly below the sample
/// minimum for support-bounded families.
fn loc_margin(stats: &SampleStats) -> f64 {
    1e-4 * (stats.max - stats.min)
}

fn fit_mle(
    samples: &[f64],
    kind: FamilyKind,
    stats: &SampleStats,
) -> Result<DistributionFamily, StatsError> {
    let margin = loc_margin(stats);
    let build = |theta: &[f64]| -> Option<DistributionFamily> {
        let fam = match kind {
            FamilyKind::BirnbaumSaunders => DistributionFamily::BirnbaumSaunders {
                c: theta[0].exp(),
                loc: stats.min - margin - theta[1].exp(),
                scale: theta[2].exp(),
            },
            FamilyKind::Gamma => DistributionFamily::Gamma {
                shape: theta[0].exp(),
                loc: stats.min - margin - theta[1].exp(),
                scale: theta[2].exp(),
            },
            FamilyKind::JohnsonSu => DistributionFamily::JohnsonSu {
                a: theta[0],
                b: theta[1].exp(),
                loc: theta[2],
                scale: theta[3].exp(),
            },
            FamilyKind::NormalInverseGaussian => {
                let a = theta[0].exp();
                DistributionFamily::NormalInverseGaussian {
                    a,
                    b: a * theta[1].clamp(-8.0, 8.0).tanh(),
                    loc: theta[2],
                    scale: theta[3].exp(),
                }
            }
            FamilyKind::Normal => unreachable!("closed form"),
        };
        fam.validate().ok().map(|_| fam)
    };

    let (theta0, steps): (Vec<f64>, Vec<f64>) = match kind {
        FamilyKind::BirnbaumSaunders => {
            let m = (stats.mean - (stats.min - 0.1 * stats.std)).max(1e-12);
            let cv2 = (stats.std * stats.std) / (m * m);
            let c0 = cv2.sqrt().clamp(0.05, 5.0);
            let scale0 = (m / (1.0 + 0.5 * c0 * c0)).max(1e-12);
            (
                vec![c0.ln(), (0.1 * stats.std).max(1e-12).ln(), scale0.ln()],
                vec![0.4, 0.7, 0.4],
            )
        }
        FamilyKind::Gamma => {
            let m = (stats.mean - (stats.min - 0.1 * stats.std)).max(1e-12);
            let k0 = ((m * m) / (stats.std * stats.std)).clamp(0.05, 1e4);
            let scale0 = (stats.std * stats.std / m).max(1e-12);
            (
                vec![k0.ln(), (0.1 * stats.std).max(1e-12).ln(), scale0.ln()],
                vec![0.4, 0.7, 0.4],
            )
        }
        FamilyKind::JohnsonSu => (
            vec![0.0, 0.0, stats.median, (stats.std / 1.787).max(1e-12).ln()],
            vec![0.4, 0.4, 0.25 * stats.std, 0.4],
        ),
        FamilyKind::NormalInverseGaussian => (
            vec![0.0, 0.0, stats.mean, stats.std.max(1e-12).ln()],
            vec![0.5, 0.5, 0.25 * stats.std, 0.4],
        ),
        FamilyKind::Normal => unreachable!("closed form"),
    };

    let objective = |theta: &[f64]| -> f64 {
        let Some(fam) = build(theta) else {
            return f64::INFINITY;
        };
        let mut nll = 0.0;
        for &x in samples {
            let lp = fam.ln_pdf(x);
            if !lp.is_finite() {
                return f64::INFINITY;
            }
            nll -= lp;
        }
        nll / samples.len() as f64
    };

    let nm = NelderMead {
        max_iter: 2000,
        f_tol: 1e-9,
        x_tol: 1e-7,
    };
    let mut result = nm.minimize(objective, &theta0, &steps);
    if !result.converged {
        // one restart from the best point found
        let restart_steps: Vec<f64> = steps.iter().map(|s| s * 0.25).collect();
        result = nm.minimize(objective, &result.x, &restart_steps);
    }
    if !result.f.is_finite() {
        return Err(StatsError::NonConvergence {
            family: kind.name(),
            detail: format!(
                "objective non-finite after {} iterations ({} evaluations)",
                result.iterations, result.evaluations
            ),
        });
    }
    if !result.converged {
        return Err(StatsError::NonConvergence {
            family: kind.name(),
            detail: format!(
                "simplex not converged after {} iterations (f = {:.6})",
                result.iterations, result.f
            ),
        });
    }
    build(&result.x).ok_or_else(|| StatsError::NonConvergence {
        family: kind.name(),
        detail: "optimum violates parameter constraints".into(),
    })
}

/// Kolmogorov-Smirnov statistic of the samples against a fitted family:
/// D = supᵢ max(|i/n − F(xᵢ)|, |(i−1)/n − F(xᵢ)|) over sorted samples.
pub fn ks_statistic(samples: &[f64], family: &DistributionFamily) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = family.cdf(x);
        let hi = ((i as f64 + 1.0) / n - f).abs();
        let lo = (i as f64 / n - f).abs();
        d = d.max(hi).max(lo);
    }
    d
}

/// Two KS statistics within this margin of each other are statistically
/// indistinguishable at the sample size (the gap from spurious nested-family
/// overfitting stays below it, genuine family separation sits well above);
/// such ties resolve toward the simpler family.
pub fn ks_tie_tolerance(n: usize) -> f64 {
    0.3 / (n.max(1) as f64).sqrt()
}

/// Fits every candidate family and returns the one with the smallest KS
/// statistic; ties (within the statistical resolution of D at this sample
/// size) break toward fewer parameters, then the fixed family ordering.
/// Errors only if every candidate fails to fit.
pub fn select_best_fit(
    samples: &[f64],
    candidates: &[FamilyKind],
) -> Result<ErrorDistributionModel, StatsError> {
    if candidates.is_empty() {
        return Err(StatsError::NoCandidates);
    }
    let mut fitted: Vec<ErrorDistributionModel> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for &kind in candidates {
        match fit_family(samples, kind) {
            Ok(model) => fitted.push(model),
            Err(e) => failures.push(format!("{}: {e}", kind.name())),
        }
    }
    if fitted.is_empty() {
        return Err(StatsError::AllCandidatesFailed(failures.join("; ")));
    }
    let d_min = fitted.iter().map(|m| m.ks).fold(f64::INFINITY, f64::min);
    let tol = ks_tie_tolerance(samples.len());
    let best = fitted
        .into_iter()
        .filter(|m| m.ks <= d_min + tol)
        .min_by_key(|m| {
            (
                m.family.kind().param_count(),
                m.family.kind().order_index(),
            )
        })
        .expect("non-empty candidate set");
    Ok(best)
}

// ── thresholds ────────────────────────────────────────────────────────────

/// Calibration result for one error stream.
#[derive(Clone, Copy, Debug)]
pub struct ChannelCalibration {
    pub threshold: f64,
    pub family: FamilyKind,
    pub ks: f64,
    pub n: usize,
}

/// The five right-tail thresholds. The flagging rule downstream is strict:
/// a step is flagged iff its error exceeds (not equals) the threshold.
#[derive(Clone, Copy, Debug)]
pub struct ThresholdSet {
    pub confidence: f64,
    pub autoencoder_angular: ChannelCalibration,
    pub autoencoder_linear: ChannelCalibration,
    pub forecaster_angular: ChannelCalibration,
    pub forecaster_linear: ChannelCalibration,
    pub vision: ChannelCalibration,
}

/// Per-detector calibration error streams from held-out normal data.
#[derive(Clone, Debug, Default)]
pub struct ErrorStreams {
    pub autoencoder_angular: Vec<f64>,
    pub autoencoder_linear: Vec<f64>,
    pub forecaster_angular: Vec<f64>,
    pub forecaster_linear: Vec<f64>,
    pub vision: Vec<f64>,
}

/// Fits each stream with the candidate families, selects by KS and takes the
/// right-tail quantile at `confidence`. Also returns the fitted model per
/// stream in field order (autoencoder e_a, e_l, forecaster e_a, e_l, vision).
pub fn calibrate_thresholds(
    streams: &ErrorStreams,
    confidence: f64,
    candidates: &[FamilyKind],
) -> Result<(ThresholdSet, Vec<ErrorDistributionModel>), StatsError> {
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(StatsError::InvalidQuantileProb(confidence));
    }
    let calibrate_one = |name: &str,
                             samples: &[f64]|
     -> Result<(ChannelCalibration, ErrorDistributionModel), StatsError> {
        if samples.len() < MIN_FIT_SAMPLES {
            return Err(StatsError::InsufficientSamples {
                needed: MIN_FIT_SAMPLES,
                got: samples.len(),
            });
        }
        let model = select_best_fit(samples, candidates).map_err(|e| {
            StatsError::AllCandidatesFailed(format!("{name}: {e}"))
        })?;
        let threshold = model.family.quantile(confidence)?;
        Ok((
            ChannelCalibration {
                threshold,
                family: model.family.kind(),
                ks: model.ks,
                n: model.n,
            },
            model,
        ))
    };

    let (aa, m0) = calibrate_one("autoencoder.angular", &streams.autoencoder_angular)?;
    let (al, m1) = calibrate_one("autoencoder.linear", &streams.autoencoder_linear)?;
    let (fa, m2) = calibrate_one("forecaster.angular", &streams.forecaster_angular)?;
    let (fl, m3) = calibrate_one("forecaster.linear", &streams.forecaster_linear)?;
    let (vi, m4) = calibrate_one("vision", &streams.vision)?;
    Ok((
        ThresholdSet {
            confidence,
            autoencoder_angular: aa,
            autoencoder_linear: al,
            forecaster_angular: fa,
            forecaster_linear: fl,
            vision: vi,
        },
        vec![m0, m1, m2, m3, m4],
    ))
}

impl ThresholdSet {
    fn channels(&self) -> [(&'static str, &ChannelCalibration); 5] {
        [
            ("autoencoder.angular", &self.autoencoder_angular),
            ("autoencoder.linear", &self.autoencoder_linear),
            ("forecaster.angular", &self.forecaster_angular),
            ("forecaster.linear", &self.forecaster_linear),
            ("vision", &self.vision),
        ]
    }

    /// Plain-text key=value serialization.
    pub fn to_kv(&self) -> String {
        let mut out = String::from("# calibrated right-tail thresholds\n");
        out.push_str(&format!("confidence = {}\n", self.confidence));
        for (name, ch) in self.channels() {
            out.push_str(&format!("{name}.threshold = {}\n", ch.threshold));
            out.push_str(&format!("{name}.family = {}\n", ch.family.name()));
            out.push_str(&format!("{name}.ks = {}\n", ch.ks));
            out.push_str(&format!("{name}.n = {}\n", ch.n));
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<ThresholdSet, StatsError> {
        let mut map = std::collections::BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| StatsError::BadThresholdFile(format!("bad line: {line}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<String, StatsError> {
            map.get(k)
                .cloned()
                .ok_or_else(|| StatsError::BadThresholdFile(format!("missing key: {k}")))
        };
        let getf = |k: &str| -> Result<f64, StatsError> {
            get(k)?
                .parse()
                .map_err(|_| StatsError::BadThresholdFile(format!("bad number for {k}")))
        };
        let chan = |name: &str| -> Result<ChannelCalibration, StatsError> {
            Ok(ChannelCalibration {
                threshold: getf(&format!("{name}.threshold"))?,
                family: FamilyKind::from_name(&get(&format!("{name}.family"))?).ok_or_else(
                    || StatsError::BadThresholdFile(format!("unknown family for {name}")),
                )?,
                ks: getf(&format!("{name}.ks"))?,
                n: getf(&format!("{name}.n"))? as usize,
            })
        };
        let set = ThresholdSet {
            confidence: getf("confidence")?,
            autoencoder_angular: chan("autoencoder.angular")?,
            autoencoder_linear: chan("autoencoder.linear")?,
            forecaster_angular: chan("forecaster.angular")?,
            forecaster_linear: chan("forecaster.linear")?,
            vision: chan("vision")?,
        };
        if !(0.0 < set.confidence && set.confidence < 1.0) {
            return Err(StatsError::BadThresholdFile("confidence out of range".into()));
        }
        for (name, ch) in set.channels() {
            if !(ch.threshold.is_finite() && ch.threshold > 0.0) {
                return Err(StatsError::BadThresholdFile(format!(
                    "{name}: non-positive threshold"
                )));
            }
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_fit_recovers_mean_and_std() {
        let gen = DistributionFamily::Normal {
            mean: 5.0,
            std: 2.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let xs: Vec<f64> = (0..5000).map(|_| gen.sample(&mut rng)).collect();
        let m = fit_family(&xs, FamilyKind::Normal).unwrap();
        let DistributionFamily::Normal { mean, std } = m.family else {
            panic!("wrong family");
        };
        assert!((mean - 5.0).abs() < 0.1, "mean {mean}");
        assert!((std - 2.0).abs() < 0.1, "std {std}");
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let xs = vec![1.5; 100];
        assert!(matches!(
            fit_family(&xs, FamilyKind::Normal),
            Err(StatsError::DegenerateSamples)
        ));
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let xs = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            fit_family(&xs, FamilyKind::Normal),
            Err(StatsError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn birnbaum_saunders_shape_recovered_within_ten_percent() {
        let gen = DistributionFamily::BirnbaumSaunders {
            c: 2.053,
            loc: 0.022,
            scale: 0.019,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        let xs: Vec<f64> = (0..10_000).map(|_| gen.sample(&mut rng)).collect();
        let m = fit_family(&xs, FamilyKind::BirnbaumSaunders).unwrap();
        let DistributionFamily::BirnbaumSaunders { c, .. } = m.family else {
            panic!("wrong family");
        };
        assert!((c - 2.053).abs() / 2.053 < 0.10, "recovered c = {c}");
    }

    #[test]
    fn ks_single_sample_against_uniform_cdf() {
        // ECDF jumps 0→1 at 0.5 while F(0.5) = 0.5
        let fam = DistributionFamily::Normal {
            mean: 0.5,
            std: 1.0,
        };
        // use a family whose cdf at the sample is exactly 0.5
        let d = ks_statistic(&[0.5], &fam);
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ks_exact_quantile_samples_give_half_over_n() {
        let fam = DistributionFamily::Normal {
            mean: 0.0,
            std: 1.0,
        };
        let n = 20;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                fam.quantile((i as f64 + 0.5) / n as f64).unwrap()
            })
            .collect();
        let d = ks_statistic(&xs, &fam);
        assert!((d - 0.5 / n as f64).abs() < 1e-9, "D = {d}");
    }

    #[test]
    fn bs_data_prefers_bs_over_normal_and_gamma() {
        let gen = DistributionFamily::BirnbaumSaunders {
            c: 2.0,
            loc: 0.0,
            scale: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..5000).map(|_| gen.sample(&mut rng)).collect();
        let bs_fit = fit_family(&xs, FamilyKind::BirnbaumSaunders).unwrap();
        let normal_fit = fit_family(&xs, FamilyKind::Normal).unwrap();
        assert!(
            bs_fit.ks < normal_fit.ks,
            "BS D={} vs Normal D={}",
            bs_fit.ks,
            normal_fit.ks
        );
        let best = select_best_fit(
            &xs,
            &[
                FamilyKind::BirnbaumSaunders,
                FamilyKind::Normal,
                FamilyKind::Gamma,
            ],
        )
        .unwrap();
        assert_eq!(best.family.kind(), FamilyKind::BirnbaumSaunders);
    }

    #[test]
    fn singleton_candidate_is_returned_regardless_of_fit() {
        let gen = DistributionFamily::Gamma {
            shape: 3.0,
            loc: 0.0,
            scale: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs: Vec<f64> = (0..500).map(|_| gen.sample(&mut rng)).collect();
        let best = select_best_fit(&xs, &[FamilyKind::Normal]).unwrap();
        assert_eq!(best.family.kind(), FamilyKind::Normal);
    }

    #[test]
    fn threshold_kv_roundtrip() {
        let ch = |t: f64, fam: FamilyKind| ChannelCalibration {
            threshold: t,
            family: fam,
            ks: 0.021,
            n: 598,
        };
        let set = ThresholdSet {
            confidence: 0.95,
            autoencoder_angular: ch(0.276, FamilyKind::BirnbaumSaunders),
            autoencoder_linear: ch(0.531, FamilyKind::JohnsonSu),
            forecaster_angular: ch(0.655, FamilyKind::Gamma),
            forecaster_linear: ch(0.322, FamilyKind::Normal),
            vision: ch(0.1598, FamilyKind::NormalInverseGaussian),
        };
        let text = set.to_kv();
        let back = ThresholdSet::from_kv(&text).unwrap();
        assert_eq!(back.confidence, 0.95);
        assert_eq!(back.autoencoder_angular.threshold, 0.276);
        assert_eq!(back.vision.family, FamilyKind::NormalInverseGaussian);
        assert_eq!(back.forecaster_linear.n, 598);
    }

    #[test]
    fn threshold_kv_rejects_missing_keys() {
        assert!(matches!(
            ThresholdSet::from_kv("confidence = 0.95\n"),
            Err(StatsError::BadThresholdFile(_))
        ));
    }

    #[test]
    fn calibrate_on_known_distribution_hits_quantile() {
        // If the calibration stream is BS(2.053, 0.022, 0.019) data, the
        // fitted 95% threshold lands near the closed-form 0.27524.
        let gen = DistributionFamily::BirnbaumSaunders {
            c: 2.053,
            loc: 0.022,
            scale: 0.019,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..4000).map(|_| gen.sample(rng)).collect()
        };
        let streams = ErrorStreams {
            autoencoder_angular: draw(&mut rng),
            autoencoder_linear: draw(&mut rng),
            forecaster_angular: draw(&mut rng),
            forecaster_linear: draw(&mut rng),
            vision: draw(&mut rng),
        };
        let (set, models) = calibrate_thresholds(
            &streams,
            0.95,
            &[FamilyKind::BirnbaumSaunders, FamilyKind::Normal],
        )
        .unwrap();
        assert_eq!(models.len(), 5);
        for (_, ch) in set.channels() {
            assert_eq!(ch.family, FamilyKind::BirnbaumSaunders);
            assert!(
                (ch.threshold - 0.275_238).abs() / 0.275_238 < 0.08,
                "threshold {}",
                ch.threshold
            );
        }
        // p = 0.5 returns the fitted median (monotonicity anchor)
        let med = models[0].family.quantile(0.5).unwrap();
        let q95 = models[0].family.quantile(0.95).unwrap();
        assert!(med < q95);
    }

    #[test]
    fn insufficient_stream_is_an_error() {
        let streams = ErrorStreams {
            autoencoder_angular: vec![0.1; 10],
            autoencoder_linear: vec![0.1; 100],
            forecaster_angular: vec![0.1; 100],
            forecaster_linear: vec![0.1; 100],
            vision: vec![0.1; 100],
        };
        assert!(matches!(
            calibrate_thresholds(&streams, 0.95, &[FamilyKind::Normal]),
            Err(StatsError::InsufficientSamples { .. })
        ));
    }
}
