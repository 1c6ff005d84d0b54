//! Recognition metrics: precision, recall, count-based IoU, F1, average
//! precision and mAP@0.5 over labelled prediction records.
//!
//! All metrics are reported in percent. A ratio with a zero denominator is
//! reported as 0. Average precision uses the all-point interpolated
//! precision envelope over distinct confidence thresholds.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmark::BoundingBox;
use crate::rules::GestureLabel;

/// Minimum box overlap for a prediction to count as a true positive.
pub const MATCH_IOU: f64 = 0.5;

/// One image: its annotated gesture (or background) and the detector's
/// output for it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(default)]
    pub ground_truth: Option<GestureLabel>,
    #[serde(default)]
    pub predicted: Option<GestureLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_box: Option<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_box: Option<BoundingBox>,
}

impl EvalRecord {
    pub fn new(
        ground_truth: Option<GestureLabel>,
        predicted: Option<GestureLabel>,
        confidence: Option<f64>,
    ) -> Self {
        Self {
            ground_truth,
            predicted,
            confidence,
            gt_box: None,
            pred_box: None,
        }
    }

    pub fn with_boxes(mut self, gt: BoundingBox, pred: BoundingBox) -> Self {
        self.gt_box = Some(gt);
        self.pred_box = Some(pred);
        self
    }

    fn predicted(&self) -> Option<GestureLabel> {
        self.predicted.filter(|l| l.is_defined())
    }

    fn ground_truth(&self) -> Option<GestureLabel> {
        self.ground_truth.filter(|l| l.is_defined())
    }

    /// Prediction and annotation agree on `class`, with sufficient box
    /// overlap when both boxes are present.
    fn is_match(&self, class: GestureLabel) -> bool {
        self.predicted() == Some(class)
            && self.ground_truth() == Some(class)
            && match (self.gt_box, self.pred_box) {
                (Some(g), Some(p)) => g.iou(&p) >= MATCH_IOU,
                _ => true,
            }
    }

    pub fn validate(&self) -> Result<(), String> {
        match (self.predicted(), self.confidence) {
            (Some(_), None) => Err("prediction without confidence".into()),
            (_, Some(c)) if !(0.0..=1.0).contains(&c) => {
                Err(format!("confidence {c} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn percent(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den * 100.0
    }
}

impl ClassCounts {
    pub fn precision(&self) -> f64 {
        percent(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> f64 {
        percent(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    /// Set overlap of predicted and true positives.
    pub fn iou_metric(&self) -> f64 {
        percent(self.tp as f64, (self.tp + self.fp + self.fn_) as f64)
    }

    pub fn f1(&self) -> f64 {
        f1_from(self.precision(), self.recall())
    }
}

/// Harmonic mean of two percentages.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn counts(records: &[EvalRecord], class: GestureLabel) -> ClassCounts {
    let mut c = ClassCounts::default();
    for r in records {
        let pred = r.predicted() == Some(class);
        let gt = r.ground_truth() == Some(class);
        if r.is_match(class) {
            c.tp += 1;
            continue;
        }
        if pred {
            c.fp += 1;
        }
        if gt {
            c.fn_ += 1;
        }
        if !pred && !gt {
            c.tn += 1;
        }
    }
    c
}

/// Average precision for `class` in percent; `None` when the class has no
/// annotated positives.
pub fn average_precision(records: &[EvalRecord], class: GestureLabel) -> Option<f64> {
    let positives = records
        .iter()
        .filter(|r| r.ground_truth() == Some(class))
        .count();
    if positives == 0 {
        return None;
    }
    let mut preds: Vec<(f64, bool)> = records
        .iter()
        .filter(|r| r.predicted() == Some(class))
        .map(|r| (r.confidence.unwrap_or(0.0), r.is_match(class)))
        .collect();
    preds.sort_by(|a, b| b.0.total_cmp(&a.0));

    // one (recall, precision) point per distinct confidence threshold
    let mut curve: Vec<(f64, f64)> = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < preds.len() {
        let conf = preds[i].0;
        while i < preds.len() && preds[i].0 == conf {
            if preds[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push((
            tp as f64 / positives as f64,
            tp as f64 / (tp + fp) as f64,
        ));
    }

    // precision envelope, right to left
    let mut envelope = vec![0.0; curve.len()];
    let mut best: f64 = 0.0;
    for (slot, &(_, p)) in envelope.iter_mut().zip(&curve).rev() {
        best = best.max(p);
        *slot = best;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (&(r, _), &p) in curve.iter().zip(&envelope) {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    Some(ap * 100.0)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no class has a defined average precision")]
    NoDefinedAp,
    #[error("line {line}: {detail}")]
    Record { line: usize, detail: String },
    #[error("reading records: {0}")]
    Io(String),
}

/// Mean of the defined per-class APs.
pub fn map_at_05(records: &[EvalRecord], classes: &[GestureLabel]) -> Result<f64, MetricsError> {
    mean_ap(classes.iter().map(|&c| average_precision(records, c)))
}

fn mean_ap(aps: impl IntoIterator<Item = Option<f64>>) -> Result<f64, MetricsError> {
    let defined: Vec<f64> = aps.into_iter().flatten().collect();
    if defined.is_empty() {
        return Err(MetricsError::NoDefinedAp);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: GestureLabel,
    pub counts: ClassCounts,
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
    pub f1: f64,
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    #[serde(rename = "map_at_0_5")]
    pub map: Option<f64>,
    /// Number of classes contributing to the mAP.
    pub k: usize,
}

impl MetricsReport {
    pub fn compute(records: &[EvalRecord], classes: &[GestureLabel]) -> Self {
        let classes: Vec<ClassMetrics> = classes
            .iter()
            .map(|&label| {
                let counts = counts(records, label);
                let ap = average_precision(records, label);
                if ap.is_none() {
                    tracing::info!(%label, "no annotated positives; AP excluded from mAP");
                }
                ClassMetrics {
                    label,
                    counts,
                    precision: counts.precision(),
                    recall: counts.recall(),
                    iou: counts.iou_metric(),
                    f1: counts.f1(),
                    ap,
                }
            })
            .collect();
        let k = classes.iter().filter(|c| c.ap.is_some()).count();
        let map = mean_ap(classes.iter().map(|c| c.ap)).ok();
        Self { classes, map, k }
    }

    /// Aligned plain-text table, one row per gesture.
    pub fn to_table(&self) -> String {
        let fmt = |x: f64| format!("{x:.2}");
        let mut rows: Vec<[String; 6]> = vec![[
            "Gesture".into(),
            "Pre(%)".into(),
            "Re(%)".into(),
            "IoU(%)".into(),
            "F1(%)".into(),
            "AP(%)".into(),
        ]];
        for c in &self.classes {
            rows.push([
                c.label.to_string(),
                fmt(c.precision),
                fmt(c.recall),
                fmt(c.iou),
                fmt(c.f1),
                c.ap.map_or_else(|| "-".to_string(), fmt),
            ]);
        }
        let widths: Vec<usize> = (0..6)
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (n, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, &w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            out.push_str(cells.join(" | ").trim_end());
            out.push('\n');
            if n == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                out.push_str(&rule.join("-+-"));
                out.push('\n');
            }
        }
        match self.map {
            Some(m) => out.push_str(&format!("mAP@0.5 = {m:.2}% over {} classes\n", self.k)),
            None => out.push_str("mAP@0.5 undefined (no annotated positives)\n"),
        }
        out
    }
}

/// Reads JSON-lines records; blank lines are skipped.
pub fn read_records(reader: impl BufRead) -> Result<Vec<EvalRecord>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(&line).map_err(|e| MetricsError::Record {
            line: i + 1,
            detail: e.to_string(),
        })?;
        record.validate().map_err(|detail| MetricsError::Record {
            line: i + 1,
            detail,
        })?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use GestureLabel::*;

    fn hit(c: GestureLabel, conf: f64) -> EvalRecord {
        EvalRecord::new(Some(c), Some(c), Some(conf))
    }

    fn false_alarm(c: GestureLabel, conf: f64) -> EvalRecord {
        EvalRecord::new(None, Some(c), Some(conf))
    }

    #[test]
    fn count_examples() {
        let all: Vec<_> = (0..10).map(|i| hit(G1, 0.5 + i as f64 / 100.0)).collect();
        assert_eq!(
            counts(&all, G1),
            ClassCounts {
                tp: 10,
                fp: 0,
                fn_: 0,
                tn: 0
            }
        );
        let mut nine: Vec<_> = (0..9).map(|_| hit(G1, 0.9)).collect();
        nine.push(false_alarm(G1, 0.4));
        let c = counts(&nine, G1);
        assert_eq!((c.tp, c.fp), (9, 1));
        assert_eq!(counts(&nine, G2).tn, 10);
    }

    #[test]
    fn low_box_overlap_is_fp_and_fn() {
        // 6x10 boxes offset by 4: overlap 2x10 = 20, union 100
        let gt = BoundingBox::new(0.0, 0.0, 6.0, 10.0);
        let pred = BoundingBox::new(4.0, 0.0, 10.0, 10.0);
        let r = hit(G3, 0.9).with_boxes(gt, pred);
        assert!((gt.iou(&pred) - 0.2).abs() < 1e-12);
        let c = counts(&[r], G3);
        assert_eq!((c.tp, c.fp, c.fn_), (0, 1, 1));

        // 10x10 boxes offset by 3.3: IoU = 67/133 > 0.5
        let near = BoundingBox::new(3.3, 0.0, 13.3, 10.0);
        let r = hit(G3, 0.9).with_boxes(BoundingBox::new(0.0, 0.0, 10.0, 10.0), near);
        assert_eq!(counts(&[r], G3).tp, 1);
    }

    #[test]
    fn formula_spot_values() {
        let c = ClassCounts {
            tp: 9,
            fp: 1,
            fn_: 0,
            tn: 0,
        };
        assert_eq!(c.precision(), 90.0);
        let c = ClassCounts {
            tp: 9,
            fp: 1,
            fn_: 1,
            tn: 0,
        };
        assert_eq!(c.recall(), 90.0);
        assert_eq!(c.f1(), 90.0);
        let c = ClassCounts {
            tp: 8,
            fp: 1,
            fn_: 1,
            tn: 0,
        };
        assert_eq!(c.iou_metric(), 80.0);
        assert_eq!(ClassCounts::default().precision(), 0.0);
        assert_eq!(ClassCounts::default().f1(), 0.0);
    }

    #[test]
    fn ap_examples() {
        let perfect = vec![hit(G0, 0.9), hit(G0, 0.8), false_alarm(G0, 0.3)];
        assert_eq!(average_precision(&perfect, G0), Some(100.0));
        assert_eq!(average_precision(&[hit(G0, 0.7)], G0), Some(100.0));

        let ranked = vec![hit(G0, 0.9), false_alarm(G0, 0.8), hit(G0, 0.7)];
        let ap = average_precision(&ranked, G0).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0 * 100.0).abs() < 1e-12);

        assert_eq!(average_precision(&[false_alarm(G0, 0.9)], G0), None);
    }

    #[test]
    fn tied_confidences_form_one_threshold() {
        // TP and FP share a threshold: only the combined point exists
        let recs = vec![
            hit(G0, 0.5),
            false_alarm(G0, 0.5),
            EvalRecord::new(Some(G0), None, None),
        ];
        assert_eq!(average_precision(&recs, G0), Some(25.0));
    }

    #[test]
    fn map_examples() {
        // class A perfect, class B AP 50: one hit at recall 1/2, one miss
        let recs = vec![
            hit(G0, 0.9),
            hit(G1, 0.9),
            EvalRecord::new(Some(G1), None, None),
        ];
        assert_eq!(map_at_05(&recs, &[G0, G1]).unwrap(), 75.0);
        assert_eq!(map_at_05(&recs, &[G1, G0]).unwrap(), 75.0);
        assert!(matches!(
            map_at_05(&recs, &[G5]),
            Err(MetricsError::NoDefinedAp)
        ));
        let twelve = mean_ap(std::iter::repeat_n(Some(90.0), 12)).unwrap();
        assert!((twelve - 90.0).abs() < 1e-12);
    }

    #[test]
    fn report_and_table() {
        let recs = vec![hit(G0, 0.9), false_alarm(G0, 0.2), hit(G5, 0.8)];
        let rep = MetricsReport::compute(&recs, &GestureLabel::DEFINED);
        assert_eq!(rep.k, 2);
        assert_eq!(rep.map, Some(100.0));
        let table = rep.to_table();
        assert!(table.starts_with("Gesture | Pre(%)"));
        assert!(table.contains("G0      |  50.00 | 100.00 |  50.00 |  66.67 | 100.00"));
        assert!(table.contains("mAP@0.5 = 100.00% over 2 classes"));
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"map_at_0_5\":100.0"));
    }

    #[test]
    fn read_records_reports_line_numbers() {
        let text = "{\"ground_truth\":\"G1\",\"predicted\":\"G1\",\"confidence\":0.9}\n\n{\"predicted\":\"G2\"}\n";
        match read_records(text.as_bytes()) {
            Err(MetricsError::Record { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let ok = "{\"ground_truth\":\"G1\",\"predicted\":\"G1\",\"confidence\":0.9}\n{\"ground_truth\":null,\"predicted\":null}\n";
        assert_eq!(read_records(ok.as_bytes()).unwrap().len(), 2);
    }
}
