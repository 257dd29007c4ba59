//! Confusion counting, precision/recall/F1/accuracy, per-scenario breakdowns
//! and report rendering. A step is predicted abnormal if any of its error
//! channels is flagged; undefined ratios are reported as absent, not zero.

use serde::{Deserialize, Serialize};

use super::events::{DetectorSource, FlagEvent};
use super::PipelineError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        if p + r == 0.0 {
            return Some(0.0);
        }
        Some(2.0 * p * r / (p + r))
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Evaluable events of one detector on one stream against per-timestamp
/// labels. Every evaluable event must find its label (timestamps from our
/// own CSV round-trip exactly).
pub fn confusion_for_stream(
    events: &[FlagEvent],
    labels: &[(f64, bool)],
) -> Result<ConfusionCounts, PipelineError> {
    let mut counts = ConfusionCounts::default();
    for e in events {
        if !e.evaluable {
            continue;
        }
        let label = labels
            .iter()
            .find(|(t, _)| *t == e.t || (t - e.t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|(_, l)| *l)
            .ok_or_else(|| PipelineError::LabelMismatch {
                stream: e.stream.clone(),
                t: e.t,
            })?;
        let predicted = e.any_flagged();
        match (predicted, label) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, false) => counts.tn += 1,
            (false, true) => counts.fn_ += 1,
        }
    }
    Ok(counts)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub scenario: String,
    pub counts: ConfusionCounts,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectorReport {
    pub source: DetectorSource,
    pub scenarios: Vec<ScenarioMetrics>,
    pub overall: ConfusionCounts,
    /// Mean of per-scenario precision/recall/F1 over the abnormal scenarios
    /// (the "average" row of the per-bag table).
    pub macro_avg_abnormal: Option<MacroMetrics>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub detectors: Vec<DetectorReport>,
}

/// Builds one detector's report from (scenario, is_abnormal, counts) rows.
pub fn detector_report(
    source: DetectorSource,
    rows: Vec<(String, bool, ConfusionCounts)>,
) -> DetectorReport {
    let mut overall = ConfusionCounts::default();
    let mut scenarios = Vec::with_capacity(rows.len());
    let mut macros: Vec<(f64, f64, f64)> = Vec::new();
    for (scenario, abnormal, counts) in rows {
        overall.add(&counts);
        if abnormal {
            if let (Some(p), Some(r), Some(f)) =
                (counts.precision(), counts.recall(), counts.f1())
            {
                macros.push((p, r, f));
            }
        }
        scenarios.push(ScenarioMetrics { scenario, counts });
    }
    let macro_avg_abnormal = if macros.is_empty() {
        None
    } else {
        let n = macros.len() as f64;
        Some(MacroMetrics {
            precision: macros.iter().map(|m| m.0).sum::<f64>() / n,
            recall: macros.iter().map(|m| m.1).sum::<f64>() / n,
            f1: macros.iter().map(|m| m.2).sum::<f64>() / n,
        })
    };
    DetectorReport {
        source,
        scenarios,
        overall,
        macro_avg_abnormal,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "-".to_string(),
    }
}

fn source_name(s: DetectorSource) -> &'static str {
    match s {
        DetectorSource::ImuAutoencoder => "imu-autoencoder",
        DetectorSource::ImuForecaster => "imu-forecaster",
        DetectorSource::Vision => "vision",
    }
}

impl EvalReport {
    /// Human-readable per-scenario table, one block per detector.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        for d in &self.detectors {
            out.push_str(&format!("detector: {}\n", source_name(d.source)));
            out.push_str(&format!(
                "{:<22} {:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9}\n",
                "scenario", "TP", "FP", "TN", "FN", "precision", "recall", "F1", "accuracy"
            ));
            for s in &d.scenarios {
                out.push_str(&format!(
                    "{:<22} {:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9}\n",
                    s.scenario,
                    s.counts.tp,
                    s.counts.fp,
                    s.counts.tn,
                    s.counts.fn_,
                    fmt_opt(s.counts.precision()),
                    fmt_opt(s.counts.recall()),
                    fmt_opt(s.counts.f1()),
                    fmt_opt(s.counts.accuracy()),
                ));
            }
            let o = &d.overall;
            out.push_str(&format!(
                "{:<22} {:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9}\n",
                "overall",
                o.tp,
                o.fp,
                o.tn,
                o.fn_,
                fmt_opt(o.precision()),
                fmt_opt(o.recall()),
                fmt_opt(o.f1()),
                fmt_opt(o.accuracy()),
            ));
            if let Some(m) = &d.macro_avg_abnormal {
                out.push_str(&format!(
                    "{:<22} {:>6} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9}\n",
                    "average (abnormal)", "", "", "", "", m.precision, m.recall, m.f1, ""
                ));
            }
            out.push('\n');
        }
        out
    }

    /// Machine-readable CSV: one row per detector+scenario plus overall rows.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("detector,scenario,tp,fp,tn,fn,precision,recall,f1,accuracy\n");
        for d in &self.detectors {
            for s in &d.scenarios {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    source_name(d.source),
                    s.scenario,
                    s.counts.tp,
                    s.counts.fp,
                    s.counts.tn,
                    s.counts.fn_,
                    fmt_opt(s.counts.precision()),
                    fmt_opt(s.counts.recall()),
                    fmt_opt(s.counts.f1()),
                    fmt_opt(s.counts.accuracy()),
                ));
            }
            let o = &d.overall;
            out.push_str(&format!(
                "{},overall,{},{},{},{},{},{},{},{}\n",
                source_name(d.source),
                o.tp,
                o.fp,
                o.tn,
                o.fn_,
                fmt_opt(o.precision()),
                fmt_opt(o.recall()),
                fmt_opt(o.f1()),
                fmt_opt(o.accuracy()),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::events::ChannelFlag;

    #[test]
    fn metric_identities_hold() {
        let c = ConfusionCounts {
            tp: 9,
            fp: 1,
            tn: 9,
            fn_: 1,
        };
        assert_eq!(c.precision(), Some(0.9));
        assert_eq!(c.recall(), Some(0.9));
        assert_eq!(c.f1(), Some(0.9));
        assert_eq!(c.accuracy(), Some(0.9));
    }

    #[test]
    fn perfect_predictions_give_accuracy_one() {
        let c = ConfusionCounts {
            tp: 40,
            fp: 0,
            tn: 60,
            fn_: 0,
        };
        assert_eq!(c.accuracy(), Some(1.0));
        assert_eq!(c.f1(), Some(1.0));
    }

    #[test]
    fn zero_predicted_positives_has_absent_precision_zero_recall() {
        let c = ConfusionCounts {
            tp: 0,
            fp: 0,
            tn: 90,
            fn_: 10,
        };
        assert_eq!(c.precision(), None);
        assert_eq!(c.recall(), Some(0.0));
        assert_eq!(c.f1(), None);
    }

    fn event(t: f64, flagged: bool, evaluable: bool) -> FlagEvent {
        FlagEvent {
            stream: "s".into(),
            t,
            source: DetectorSource::ImuAutoencoder,
            evaluable,
            channels: if evaluable {
                vec![ChannelFlag {
                    name: "e_a".into(),
                    error: if flagged { 1.0 } else { 0.0 },
                    threshold: 0.5,
                    flagged,
                }]
            } else {
                Vec::new()
            },
        }
    }

    #[test]
    fn confusion_matches_labels_by_timestamp() {
        let events = vec![
            event(0.0, false, false), // warm-up, ignored
            event(0.1, true, true),   // TP
            event(0.2, true, true),   // FP
            event(0.3, false, true),  // TN
            event(0.4, false, true),  // FN
        ];
        let labels = vec![
            (0.0, false),
            (0.1, true),
            (0.2, false),
            (0.3, false),
            (0.4, true),
        ];
        let c = confusion_for_stream(&events, &labels).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
    }

    #[test]
    fn missing_label_is_an_error() {
        let events = vec![event(0.7, true, true)];
        let labels = vec![(0.0, false)];
        assert!(matches!(
            confusion_for_stream(&events, &labels),
            Err(PipelineError::LabelMismatch { .. })
        ));
    }

    #[test]
    fn macro_average_covers_abnormal_scenarios_only() {
        let rows = vec![
            (
                "normal-5".to_string(),
                false,
                ConfusionCounts {
                    tp: 0,
                    fp: 5,
                    tn: 95,
                    fn_: 0,
                },
            ),
            (
                "abnormal-0".to_string(),
                true,
                ConfusionCounts {
                    tp: 9,
                    fp: 1,
                    tn: 89,
                    fn_: 1,
                },
            ),
            (
                "abnormal-1".to_string(),
                true,
                ConfusionCounts {
                    tp: 8,
                    fp: 2,
                    tn: 88,
                    fn_: 2,
                },
            ),
        ];
        let report = detector_report(DetectorSource::ImuForecaster, rows);
        let m = report.macro_avg_abnormal.unwrap();
        assert!((m.precision - (0.9 + 0.8) / 2.0).abs() < 1e-12);
        assert!((m.recall - (0.9 + 0.8) / 2.0).abs() < 1e-12);
        assert_eq!(report.overall.total(), 300);
        let table = EvalReport {
            detectors: vec![report],
        }
        .render_table();
        assert!(table.contains("average (abnormal)"));
        assert!(table.contains("imu-forecaster"));
    }
}
