//! Independent oracles shared by the integration tests and the acceptance
//! runner, plus the exhaustive and fuzzed checks built on them.

#![allow(dead_code)]

pub mod checks;

use gestgait_core::depth::ButtonEdge;
use gestgait_core::fsm::{GaitState, Mode};
use gestgait_core::landmark::BoundingBox;
use gestgait_core::metrics::EvalRecord;
use gestgait_core::rules::GestureLabel;

/// Expected result of one gesture in one idle (state, mode) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleCell {
    /// States entered while the command executes, ending where it rests.
    pub visits: Vec<GaitState>,
    /// Mode while executing.
    pub mode: Mode,
}

/// The twelve transitions of the gait state machine, written out by hand.
pub fn fsm_oracle(state: GaitState, mode: Mode, gesture: GestureLabel) -> Option<OracleCell> {
    use GaitState::*;
    use GestureLabel as G;
    const TABLE: &[(GaitState, Mode, GestureLabel, &[GaitState], Mode)] = &[
        (Unpowered, Mode::None, G::G0, &[Standing], Mode::None),
        (Sitting, Mode::None, G::Rock, &[Standing], Mode::None),
        (Standing, Mode::None, G::Love, &[Sitting], Mode::None),
        (Standing, Mode::None, G::G1, &[RightForward], Mode::StepByStep),
        (RightForward, Mode::StepByStep, G::G2, &[LeftForward], Mode::StepByStep),
        (LeftForward, Mode::StepByStep, G::G3, &[RightForward], Mode::StepByStep),
        (RightForward, Mode::StepByStep, G::G4, &[Standing], Mode::None),
        (Standing, Mode::None, G::G5, &[LeftForward], Mode::Continuous),
        (LeftForward, Mode::Continuous, G::G6, &[Standing], Mode::None),
        (RightForward, Mode::Continuous, G::G6, &[Standing], Mode::None),
        (Standing, Mode::None, G::G7, &[RightHighStep, Standing], Mode::None),
        (Standing, Mode::None, G::G8, &[RightLowStep, Standing], Mode::None),
        (Standing, Mode::None, G::G9, &[RightObstacle, Standing], Mode::None),
    ];
    TABLE
        .iter()
        .find(|(s, m, g, _, _)| *s == state && *m == mode && *g == gesture)
        .map(|(_, _, _, visits, mode)| OracleCell {
            visits: visits.to_vec(),
            mode: *mode,
        })
}

/// Commands the press/release protocol must issue for a label and edge
/// sequence with evenly spaced frames: at each release, the label of the
/// most recent press if the three labels ending at that press were
/// identical and defined.
pub fn debounce_oracle(labels: &[GestureLabel], edges: &[ButtonEdge]) -> Vec<(usize, GestureLabel)> {
    let mut out = Vec::new();
    let mut pending: Option<GestureLabel> = None;
    for (i, edge) in edges.iter().enumerate() {
        match edge {
            ButtonEdge::Press => {
                pending = None;
                if i >= 2 {
                    let w = &labels[i - 2..=i];
                    if w[0].is_defined() && w.iter().all(|&l| l == w[0]) {
                        pending = Some(w[0]);
                    }
                }
            }
            ButtonEdge::Release => {
                if let Some(g) = pending.take() {
                    out.push((i, g));
                }
            }
            ButtonEdge::None => {}
        }
    }
    out
}

fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.u_max.min(b.u_max) - a.u_min.max(b.u_min)).max(0.0);
    let h = (a.v_max.min(b.v_max) - a.v_min.max(b.v_min)).max(0.0);
    let inter = w * h;
    let union = (a.u_max - a.u_min) * (a.v_max - a.v_min) + (b.u_max - b.u_min) * (b.v_max - b.v_min)
        - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn oracle_is_tp(r: &EvalRecord, class: GestureLabel) -> bool {
    r.predicted == Some(class)
        && r.ground_truth == Some(class)
        && match (&r.gt_box, &r.pred_box) {
            (Some(g), Some(p)) => oracle_iou(g, p) >= 0.5,
            _ => true,
        }
}

/// Average precision by direct counting: for each recall level k/G, the
/// best precision over all confidence thresholds that reach it.
pub fn ap_oracle(records: &[EvalRecord], class: GestureLabel) -> Option<f64> {
    let g = records.iter().filter(|r| r.ground_truth == Some(class)).count();
    if g == 0 {
        return None;
    }
    let preds: Vec<(f64, bool)> = records
        .iter()
        .filter(|r| r.predicted == Some(class))
        .map(|r| (r.confidence.unwrap(), oracle_is_tp(r, class)))
        .collect();
    // (tp, precision) at every threshold "confidence >= t"
    let points: Vec<(usize, f64)> = preds
        .iter()
        .map(|&(t, _)| {
            let kept: Vec<bool> = preds.iter().filter(|p| p.0 >= t).map(|p| p.1).collect();
            let tp = kept.iter().filter(|&&x| x).count();
            (tp, tp as f64 / kept.len() as f64)
        })
        .collect();
    let mut sum = 0.0;
    for k in 1..=g {
        let best = points
            .iter()
            .filter(|(tp, _)| *tp >= k)
            .map(|&(_, p)| p)
            .fold(0.0, f64::max);
        sum += best;
    }
    Some(sum / g as f64 * 100.0)
}

/// Every single-class scoring pattern with up to `max_preds` predictions
/// over three confidence levels (so ties occur), combined with 0..=2
/// unmatched positives. Returned as record lists for `class`; false
/// positives alternate between background and `other` ground truth.
pub fn enumerate_datasets(max_preds: usize, class: GestureLabel, other: GestureLabel) -> Vec<Vec<EvalRecord>> {
    const LEVELS: [f64; 3] = [0.25, 0.5, 0.75];
    // a prediction kind is (level index, is true positive): 6 kinds
    fn multisets(n: usize, start: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == n {
            out.push(acc.clone());
            return;
        }
        for k in start..6 {
            acc.push(k);
            multisets(n, k, acc, out);
            acc.pop();
        }
    }
    let mut kinds = Vec::new();
    for n in 0..=max_preds {
        multisets(n, 0, &mut Vec::new(), &mut kinds);
    }
    let mut out = Vec::new();
    for ks in &kinds {
        for missed in 0..=2 {
            let mut recs = Vec::new();
            for (i, &k) in ks.iter().enumerate() {
                let conf = LEVELS[k / 2];
                let tp = k % 2 == 1;
                let gt = if tp {
                    Some(class)
                } else if i % 2 == 0 {
                    None
                } else {
                    Some(other)
                };
                recs.push(EvalRecord::new(gt, Some(class), Some(conf)));
            }
            for _ in 0..missed {
                recs.push(EvalRecord::new(Some(class), None, None));
            }
            out.push(recs);
        }
    }
    out
}
