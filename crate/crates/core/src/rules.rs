//! Declarative gesture rule table and classifier.
//!
//! Each of the twelve gestures is one row: a required hull location for
//! every fingertip, a flexion condition for every finger, and optional
//! fingertip distance constraints. A finger counts as bent when its joint
//! angle is at most the threshold and as open when it is strictly above.
//! A frame is labelled only when exactly one row matches.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Finger, GeometryError, HullMembership};
use crate::landmark::HandFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureLabel {
    G0,
    G1,
    G2,
    G3,
    G4,
    G5,
    G6,
    G7,
    G8,
    G9,
    Love,
    Rock,
    Unrecognized,
}

impl GestureLabel {
    /// The twelve defined gestures, in table order.
    pub const DEFINED: [GestureLabel; 12] = [
        GestureLabel::G0,
        GestureLabel::G1,
        GestureLabel::G2,
        GestureLabel::G3,
        GestureLabel::G4,
        GestureLabel::G5,
        GestureLabel::G6,
        GestureLabel::G7,
        GestureLabel::G8,
        GestureLabel::G9,
        GestureLabel::Love,
        GestureLabel::Rock,
    ];

    pub fn is_defined(self) -> bool {
        self != GestureLabel::Unrecognized
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GestureLabel::G0 => "G0",
            GestureLabel::G1 => "G1",
            GestureLabel::G2 => "G2",
            GestureLabel::G3 => "G3",
            GestureLabel::G4 => "G4",
            GestureLabel::G5 => "G5",
            GestureLabel::G6 => "G6",
            GestureLabel::G7 => "G7",
            GestureLabel::G8 => "G8",
            GestureLabel::G9 => "G9",
            GestureLabel::Love => "Love",
            GestureLabel::Rock => "Rock",
            GestureLabel::Unrecognized => "Unrecognized",
        }
    }

    /// The exoskeleton action this gesture requests.
    pub fn gait_action(self) -> Option<&'static str> {
        Some(match self {
            GestureLabel::G0 => "initialise: power on and stand",
            GestureLabel::G1 => "step-by-step walking: initial right step",
            GestureLabel::G2 => "step-by-step walking: left step",
            GestureLabel::G3 => "step-by-step walking: right step",
            GestureLabel::G4 => "step-by-step walking: retract to standing",
            GestureLabel::G5 => "continuous walking, starting with the left leg",
            GestureLabel::G6 => "stop continuous walking and stand",
            GestureLabel::G7 => "stair ascent",
            GestureLabel::G8 => "stair descent",
            GestureLabel::G9 => "obstacle crossing",
            GestureLabel::Love => "sit down",
            GestureLabel::Rock => "stand up",
            GestureLabel::Unrecognized => return None,
        })
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown gesture label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for GestureLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GestureLabel::DEFINED
            .iter()
            .chain(std::iter::once(&GestureLabel::Unrecognized))
            .copied()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Where a fingertip must lie for a rule to match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HullRequirement {
    Inner,
    /// Inner or between the hulls.
    NotOutside,
    Outside,
}

impl HullRequirement {
    pub fn accepts(self, m: HullMembership) -> bool {
        match self {
            HullRequirement::Inner => m == HullMembership::Inner,
            HullRequirement::NotOutside => m != HullMembership::Outside,
            HullRequirement::Outside => m == HullMembership::Outside,
        }
    }
}

/// Flexion band for one finger: `above < angle <= at_most`, either side
/// optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleCondition {
    pub finger: Finger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub above: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_most: Option<f64>,
}

impl AngleCondition {
    pub fn bent(finger: Finger, threshold: f64) -> Self {
        Self {
            finger,
            above: None,
            at_most: Some(threshold),
        }
    }

    pub fn open(finger: Finger, threshold: f64) -> Self {
        Self {
            finger,
            above: Some(threshold),
            at_most: None,
        }
    }

    pub fn band(finger: Finger, above: f64, at_most: f64) -> Self {
        Self {
            finger,
            above: Some(above),
            at_most: Some(at_most),
        }
    }

    pub fn accepts(&self, angle: f64) -> bool {
        self.above.is_none_or(|lo| angle > lo) && self.at_most.is_none_or(|hi| angle <= hi)
    }

    fn describe(&self) -> String {
        match (self.above, self.at_most) {
            (Some(lo), Some(hi)) => format!("{lo}° < θ ≤ {hi}°"),
            (Some(lo), None) => format!("θ > {lo}°"),
            (None, Some(hi)) => format!("θ ≤ {hi}°"),
            (None, None) => "any".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceConstraint {
    /// Pixel distance between two keypoints strictly above `px`, given at
    /// the table's reference width.
    Greater { a: usize, b: usize, px: f64 },
    /// Ratio of two pixel distances strictly below `value`.
    RatioLess {
        num: [usize; 2],
        den: [usize; 2],
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureRule {
    pub label: GestureLabel,
    /// Fingertip requirements, thumb → pinky.
    pub hull: [HullRequirement; 5],
    /// Flexion conditions, thumb → pinky.
    pub angles: [AngleCondition; 5],
    #[serde(default)]
    pub distances: Vec<DistanceConstraint>,
}

pub const THUMB_THRESHOLD_DEG: f64 = 53.0;
pub const PINKY_THRESHOLD_DEG: f64 = 49.0;
pub const FINGER_THRESHOLD_DEG: f64 = 65.0;
pub const FOREFINGER_EXTENDED_DEG: f64 = 160.0;
pub const FOREFINGER_G5_DEG: f64 = 170.0;
pub const FOREFINGER_G9_DEG: f64 = 120.0;
pub const FOREFINGER_CURLED_DEG: f64 = 65.0;
pub const FINGERTIP_GAP_PX: f64 = 100.0;
pub const G7_RATIO_BOUND: f64 = 2.0;
/// Frame width at which pixel thresholds are specified.
pub const REFERENCE_WIDTH_PX: f64 = 1280.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTable {
    pub reference_width_px: f64,
    pub rules: Vec<GestureRule>,
}

#[derive(Debug, Error)]
pub enum RuleTableError {
    #[error("rule table must define each gesture exactly once; {0}")]
    Coverage(String),
    #[error("invalid rule table JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reference width must be positive")]
    ReferenceWidth,
}

/// Per-frame geometric measurements shared by every rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub angles: [f64; 5],
    pub membership: [HullMembership; 5],
    /// `frame_width / reference_width`.
    pub scale: f64,
}

impl Measurements {
    pub fn of(frame: &HandFrame, reference_width_px: f64) -> Result<Self, GeometryError> {
        let mut angles = [0.0; 5];
        for (slot, finger) in angles.iter_mut().zip(Finger::ALL) {
            *slot = geometry::joint_angle(frame, finger)?;
        }
        Ok(Self {
            angles,
            membership: geometry::hull_membership(frame)?,
            scale: f64::from(frame.frame_width()) / reference_width_px,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredicateReport {
    pub predicate: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleReport {
    pub label: GestureLabel,
    pub matched: bool,
    pub predicates: Vec<PredicateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    /// Set when the frame geometry could not be measured.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<String>,
    pub angles: Option<[f64; 5]>,
    pub membership: Option<[HullMembership; 5]>,
    pub rules: Vec<RuleReport>,
    pub label: GestureLabel,
}

impl Explanation {
    pub fn rule(&self, label: GestureLabel) -> Option<&RuleReport> {
        self.rules.iter().find(|r| r.label == label)
    }
}

impl GestureRule {
    fn evaluate(&self, frame: &HandFrame, m: &Measurements) -> RuleReport {
        let mut predicates = Vec::with_capacity(12);
        for (i, (req, got)) in self.hull.iter().zip(m.membership).enumerate() {
            predicates.push(PredicateReport {
                predicate: format!("tip {} {:?} (is {:?})", Finger::ALL[i].tip(), req, got),
                measured: None,
                holds: req.accepts(got),
            });
        }
        for cond in &self.angles {
            let angle = m.angles[cond.finger.index()];
            predicates.push(PredicateReport {
                predicate: format!("{} {}", cond.finger.name(), cond.describe()),
                measured: Some(angle),
                holds: cond.accepts(angle),
            });
        }
        for c in &self.distances {
            predicates.push(match *c {
                DistanceConstraint::Greater { a, b, px } => {
                    let d = geometry::pixel_distance(frame, a, b);
                    let threshold = px * m.scale;
                    PredicateReport {
                        predicate: format!("P{a}-{b} > {threshold}px"),
                        measured: Some(d),
                        holds: d > threshold,
                    }
                }
                DistanceConstraint::RatioLess { num, den, value } => {
                    let r = geometry::distance_ratio(frame, (num[0], num[1]), (den[0], den[1]));
                    PredicateReport {
                        predicate: format!(
                            "P{}-{} / P{}-{} < {value}",
                            num[0], num[1], den[0], den[1]
                        ),
                        measured: r.as_ref().ok().copied(),
                        holds: r.is_ok_and(|r| r < value),
                    }
                }
            });
        }
        RuleReport {
            label: self.label,
            matched: predicates.iter().all(|p| p.holds),
            predicates,
        }
    }

    fn matches(&self, frame: &HandFrame, m: &Measurements) -> bool {
        let hull_ok = self
            .hull
            .iter()
            .zip(m.membership)
            .all(|(req, got)| req.accepts(got));
        if !hull_ok {
            return false;
        }
        if !self
            .angles
            .iter()
            .all(|c| c.accepts(m.angles[c.finger.index()]))
        {
            return false;
        }
        self.distances.iter().all(|c| match *c {
            DistanceConstraint::Greater { a, b, px } => {
                geometry::pixel_distance(frame, a, b) > px * m.scale
            }
            DistanceConstraint::RatioLess { num, den, value } => {
                geometry::distance_ratio(frame, (num[0], num[1]), (den[0], den[1]))
                    .is_ok_and(|r| r < value)
            }
        })
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl RuleTable {
    /// The twelve-gesture table with the published thresholds.
    pub fn builtin() -> Self {
        use AngleCondition as A;
        use Finger::*;
        use HullRequirement::{Inner as I, NotOutside as N, Outside as O};

        let thumb_bent = A::bent(Thumb, THUMB_THRESHOLD_DEG);
        let thumb_open = A::open(Thumb, THUMB_THRESHOLD_DEG);
        let fore_ext = A::open(Forefinger, FOREFINGER_EXTENDED_DEG);
        let fore_bent = A::bent(Forefinger, FOREFINGER_CURLED_DEG);
        let mid_bent = A::bent(Middle, FINGER_THRESHOLD_DEG);
        let mid_open = A::open(Middle, FINGER_THRESHOLD_DEG);
        let ring_bent = A::bent(Ring, FINGER_THRESHOLD_DEG);
        let ring_open = A::open(Ring, FINGER_THRESHOLD_DEG);
        let pinky_bent = A::bent(Pinky, PINKY_THRESHOLD_DEG);
        let pinky_open = A::open(Pinky, PINKY_THRESHOLD_DEG);

        let rule = |label, hull, angles, distances| GestureRule {
            label,
            hull,
            angles,
            distances,
        };
        let rules = vec![
            rule(
                GestureLabel::G0,
                [I, I, I, I, I],
                [thumb_bent, fore_bent, mid_bent, ring_bent, pinky_bent],
                vec![],
            ),
            rule(
                GestureLabel::G1,
                [N, O, N, N, N],
                [thumb_bent, fore_ext, mid_bent, ring_bent, pinky_bent],
                vec![],
            ),
            rule(
                GestureLabel::G2,
                [N, O, O, N, N],
                [thumb_bent, fore_ext, mid_open, ring_bent, pinky_bent],
                vec![],
            ),
            rule(
                GestureLabel::G3,
                [N, O, O, O, N],
                [thumb_bent, fore_ext, mid_open, ring_open, pinky_bent],
                vec![],
            ),
            rule(
                GestureLabel::G4,
                [N, O, O, O, O],
                [thumb_bent, fore_ext, mid_open, ring_open, pinky_open],
                vec![],
            ),
            rule(
                GestureLabel::G5,
                [O, O, O, O, O],
                [
                    thumb_open,
                    A::open(Forefinger, FOREFINGER_G5_DEG),
                    mid_open,
                    ring_open,
                    pinky_open,
                ],
                vec![],
            ),
            rule(
                GestureLabel::G6,
                [O, N, N, N, O],
                [thumb_open, fore_bent, mid_bent, ring_bent, pinky_open],
                vec![DistanceConstraint::Greater {
                    a: 4,
                    b: 20,
                    px: FINGERTIP_GAP_PX,
                }],
            ),
            rule(
                GestureLabel::G7,
                [O, O, O, N, N],
                [thumb_open, fore_ext, mid_open, ring_bent, pinky_bent],
                vec![DistanceConstraint::RatioLess {
                    num: [4, 12],
                    den: [8, 12],
                    value: G7_RATIO_BOUND,
                }],
            ),
            rule(
                GestureLabel::G8,
                [O, O, N, N, N],
                [thumb_open, fore_ext, mid_bent, ring_bent, pinky_bent],
                vec![DistanceConstraint::Greater {
                    a: 4,
                    b: 8,
                    px: FINGERTIP_GAP_PX,
                }],
            ),
            rule(
                GestureLabel::G9,
                [N, O, N, N, N],
                [
                    thumb_bent,
                    A::band(Forefinger, FOREFINGER_CURLED_DEG, FOREFINGER_G9_DEG),
                    mid_bent,
                    ring_bent,
                    pinky_bent,
                ],
                vec![],
            ),
            rule(
                GestureLabel::Love,
                [O, O, N, N, O],
                [thumb_open, fore_ext, mid_bent, ring_bent, pinky_open],
                vec![],
            ),
            rule(
                GestureLabel::Rock,
                [N, O, N, N, O],
                [thumb_bent, fore_ext, mid_bent, ring_bent, pinky_open],
                vec![],
            ),
        ];
        Self {
            reference_width_px: REFERENCE_WIDTH_PX,
            rules,
        }
    }

    pub fn validate(&self) -> Result<(), RuleTableError> {
        if !(self.reference_width_px.is_finite() && self.reference_width_px > 0.0) {
            return Err(RuleTableError::ReferenceWidth);
        }
        for label in GestureLabel::DEFINED {
            let n = self.rules.iter().filter(|r| r.label == label).count();
            if n != 1 {
                return Err(RuleTableError::Coverage(format!("{label} appears {n} times")));
            }
        }
        if self.rules.len() != GestureLabel::DEFINED.len() {
            return Err(RuleTableError::Coverage(
                "Unrecognized cannot have a rule".into(),
            ));
        }
        for r in &self.rules {
            for (cond, finger) in r.angles.iter().zip(Finger::ALL) {
                if cond.finger != finger {
                    return Err(RuleTableError::Coverage(format!(
                        "{}: angle conditions must be ordered thumb to pinky",
                        r.label
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, RuleTableError> {
        let table: RuleTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    /// Canonical pretty-printed JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rule table serialises")
    }

    pub fn rule(&self, label: GestureLabel) -> Option<&GestureRule> {
        self.rules.iter().find(|r| r.label == label)
    }

    pub fn measure(&self, frame: &HandFrame) -> Result<Measurements, GeometryError> {
        Measurements::of(frame, self.reference_width_px)
    }

    /// Labels of every rule that matches the frame.
    pub fn matching_rules(&self, frame: &HandFrame) -> Result<Vec<GestureLabel>, GeometryError> {
        let m = self.measure(frame)?;
        Ok(self
            .rules
            .iter()
            .filter(|r| r.matches(frame, &m))
            .map(|r| r.label)
            .collect())
    }

    /// The unique matching label, or `Unrecognized` for zero or several
    /// matches and for degenerate geometry.
    pub fn classify(&self, frame: &HandFrame) -> GestureLabel {
        match self.matching_rules(frame) {
            Ok(labels) if labels.len() == 1 => labels[0],
            _ => GestureLabel::Unrecognized,
        }
    }

    pub fn explain(&self, frame: &HandFrame) -> Explanation {
        match self.measure(frame) {
            Err(e) => Explanation {
                degenerate: Some(e.to_string()),
                angles: None,
                membership: None,
                rules: Vec::new(),
                label: GestureLabel::Unrecognized,
            },
            Ok(m) => {
                let rules: Vec<RuleReport> =
                    self.rules.iter().map(|r| r.evaluate(frame, &m)).collect();
                let matched: Vec<GestureLabel> =
                    rules.iter().filter(|r| r.matched).map(|r| r.label).collect();
                Explanation {
                    degenerate: None,
                    angles: Some(m.angles),
                    membership: Some(m.membership),
                    label: if matched.len() == 1 {
                        matched[0]
                    } else {
                        GestureLabel::Unrecognized
                    },
                    rules,
                }
            }
        }
    }
}

/// Rule table plus handedness handling.
#[derive(Debug, Clone, Default)]
pub struct Classifier {
    table: RuleTable,
    mirror_u: bool,
}

impl Classifier {
    pub fn new(table: RuleTable, mirror_u: bool) -> Self {
        Self { table, mirror_u }
    }

    pub fn table(&self) -> &RuleTable {
        &self.table
    }

    pub fn classify(&self, frame: &HandFrame) -> GestureLabel {
        if self.mirror_u {
            self.table.classify(&frame.mirrored())
        } else {
            self.table.classify(frame)
        }
    }

    pub fn explain(&self, frame: &HandFrame) -> Explanation {
        if self.mirror_u {
            self.table.explain(&frame.mirrored())
        } else {
            self.table.explain(frame)
        }
    }
}
