//! Canonical hand landmark frame.
//!
//! Raw input is the 21-point hand skeleton in pixel space (0 = wrist,
//! 4/8/12/16/20 = fingertips). Every accepted frame is augmented with a
//! virtual palm anchor at index 21, the midpoint of the index and pinky
//! knuckles (5 and 17), and with the axis-aligned box over all 22 points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of keypoints produced by the landmark estimator.
pub const RAW_KEYPOINTS: usize = 21;
/// Raw keypoints plus the virtual palm anchor.
pub const FRAME_KEYPOINTS: usize = 22;
/// Index of the virtual palm anchor.
pub const PALM_ANCHOR: usize = 21;

pub const WRIST: usize = 0;
pub const INDEX_MCP: usize = 5;
pub const PINKY_MCP: usize = 17;

/// Fingertip indices in thumb → pinky order.
pub const FINGERTIPS: [usize; 5] = [4, 8, 12, 16, 20];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
}

impl Keypoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn midpoint(a: Keypoint, b: Keypoint) -> Keypoint {
        Keypoint::new((a.u + b.u) / 2.0, (a.v + b.v) / 2.0)
    }
}

impl From<[f64; 2]> for Keypoint {
    fn from([u, v]: [f64; 2]) -> Self {
        Keypoint::new(u, v)
    }
}

/// Closed axis-aligned box in pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BoundingBox {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Self {
        debug_assert!(u_min <= u_max && v_min <= v_max);
        Self {
            u_min,
            v_min,
            u_max,
            v_max,
        }
    }

    /// Smallest box enclosing every point. `None` for an empty slice.
    pub fn enclosing(points: &[Keypoint]) -> Option<Self> {
        let first = points.first()?;
        let mut b = BoundingBox::new(first.u, first.v, first.u, first.v);
        for p in &points[1..] {
            b.u_min = b.u_min.min(p.u);
            b.v_min = b.v_min.min(p.v);
            b.u_max = b.u_max.max(p.u);
            b.v_max = b.v_max.max(p.v);
        }
        Some(b)
    }

    /// Boundary-inclusive containment.
    pub fn contains(&self, p: Keypoint) -> bool {
        self.u_min <= p.u && p.u <= self.u_max && self.v_min <= p.v && p.v <= self.v_max
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Intersection-over-union of two boxes; 0 when both are degenerate.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let iw = (self.u_max.min(other.u_max) - self.u_min.max(other.u_min)).max(0.0);
        let ih = (self.v_max.min(other.v_max) - self.v_min.max(other.v_min)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

pub fn bbox_contains(b: &BoundingBox, p: Keypoint) -> bool {
    b.contains(p)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LandmarkError {
    #[error("expected {RAW_KEYPOINTS} keypoints, got {0}")]
    KeypointCount(usize),
    #[error("keypoint {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("frame dimensions must be positive, got {width}x{height}")]
    FrameDims { width: u32, height: u32 },
    #[error("detection confidence {0} outside [0, 1]")]
    Confidence(f64),
}

/// One timestamped hand observation.
#[derive(Debug, Clone, PartialEq)]
pub struct HandFrame {
    timestamp_ms: i64,
    frame_width: u32,
    frame_height: u32,
    keypoints: [Keypoint; FRAME_KEYPOINTS],
    bbox: BoundingBox,
    detection_confidence: f64,
}

impl HandFrame {
    pub fn timestamp_ms(&self) -> i64 {
        self.timestamp_ms
    }

    pub fn frame_width(&self) -> u32 {
        self.frame_width
    }

    pub fn frame_height(&self) -> u32 {
        self.frame_height
    }

    /// Keypoint by index, 0..=21 (21 is the virtual palm anchor).
    pub fn keypoint(&self, index: usize) -> Keypoint {
        self.keypoints[index]
    }

    pub fn keypoints(&self) -> &[Keypoint; FRAME_KEYPOINTS] {
        &self.keypoints
    }

    pub fn raw_keypoints(&self) -> &[Keypoint] {
        &self.keypoints[..RAW_KEYPOINTS]
    }

    pub fn palm_anchor(&self) -> Keypoint {
        self.keypoints[PALM_ANCHOR]
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn detection_confidence(&self) -> f64 {
        self.detection_confidence
    }

    /// The same hand reflected about the vertical centre line, used to
    /// evaluate left hands against right-hand rules.
    pub fn mirrored(&self) -> HandFrame {
        let w = f64::from(self.frame_width);
        let raw: Vec<Keypoint> = self
            .raw_keypoints()
            .iter()
            .map(|p| Keypoint::new(w - p.u, p.v))
            .collect();
        augment(
            &raw,
            self.timestamp_ms,
            (self.frame_width, self.frame_height),
            self.detection_confidence,
        )
        .expect("mirroring an accepted frame stays valid")
    }
}

/// Validates raw landmarks and derives the palm anchor and bounding box.
///
/// Coordinates outside the frame are clamped to `[0, width] x [0, height]`
/// rather than rejected; non-finite coordinates and a wrong keypoint count
/// are errors.
pub fn augment(
    raw: &[Keypoint],
    timestamp_ms: i64,
    (frame_width, frame_height): (u32, u32),
    confidence: f64,
) -> Result<HandFrame, LandmarkError> {
    if raw.len() != RAW_KEYPOINTS {
        return Err(LandmarkError::KeypointCount(raw.len()));
    }
    if frame_width == 0 || frame_height == 0 {
        return Err(LandmarkError::FrameDims {
            width: frame_width,
            height: frame_height,
        });
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(LandmarkError::Confidence(confidence));
    }
    let (w, h) = (f64::from(frame_width), f64::from(frame_height));
    let mut keypoints = [Keypoint::default(); FRAME_KEYPOINTS];
    for (index, (dst, src)) in keypoints.iter_mut().zip(raw).enumerate() {
        if !src.is_finite() {
            return Err(LandmarkError::NonFinite { index });
        }
        *dst = Keypoint::new(src.u.clamp(0.0, w), src.v.clamp(0.0, h));
    }
    keypoints[PALM_ANCHOR] = Keypoint::midpoint(keypoints[INDEX_MCP], keypoints[PINKY_MCP]);
    let bbox = BoundingBox::enclosing(&keypoints).expect("22 points");
    Ok(HandFrame {
        timestamp_ms,
        frame_width,
        frame_height,
        keypoints,
        bbox,
        detection_confidence: confidence,
    })
}

/// Converts landmarks given as fractions of the frame size to pixels.
pub fn denormalize(points: &[Keypoint], (width, height): (u32, u32)) -> Vec<Keypoint> {
    let (w, h) = (f64::from(width), f64::from(height));
    points
        .iter()
        .map(|p| Keypoint::new(p.u * w, p.v * h))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw_with(overrides: &[(usize, Keypoint)], fill: Keypoint) -> Vec<Keypoint> {
        let mut raw = vec![fill; RAW_KEYPOINTS];
        for &(i, p) in overrides {
            raw[i] = p;
        }
        raw
    }

    #[test]
    fn anchor_is_knuckle_midpoint() {
        let raw = raw_with(
            &[
                (5, Keypoint::new(100.0, 100.0)),
                (17, Keypoint::new(200.0, 100.0)),
            ],
            Keypoint::new(150.0, 150.0),
        );
        let f = augment(&raw, 0, (640, 480), 1.0).unwrap();
        assert_eq!(f.palm_anchor(), Keypoint::new(150.0, 100.0));

        let raw = raw_with(
            &[
                (5, Keypoint::new(320.0, 200.0)),
                (17, Keypoint::new(400.0, 260.0)),
            ],
            Keypoint::new(350.0, 230.0),
        );
        let f = augment(&raw, 0, (640, 480), 1.0).unwrap();
        assert_eq!(f.palm_anchor(), Keypoint::new(360.0, 230.0));
    }

    #[test]
    fn identical_points_give_degenerate_box() {
        let raw = vec![Keypoint::new(50.0, 50.0); RAW_KEYPOINTS];
        let f = augment(&raw, 0, (640, 480), 0.5).unwrap();
        assert_eq!(f.bbox(), BoundingBox::new(50.0, 50.0, 50.0, 50.0));
    }

    #[test]
    fn rejects_malformed_input() {
        let raw = vec![Keypoint::new(1.0, 1.0); 20];
        assert_eq!(
            augment(&raw, 0, (10, 10), 1.0),
            Err(LandmarkError::KeypointCount(20))
        );
        let mut raw = vec![Keypoint::new(1.0, 1.0); RAW_KEYPOINTS];
        raw[7].v = f64::NAN;
        assert_eq!(
            augment(&raw, 0, (10, 10), 1.0),
            Err(LandmarkError::NonFinite { index: 7 })
        );
        raw[7].v = f64::INFINITY;
        assert!(augment(&raw, 0, (10, 10), 1.0).is_err());
        let raw = vec![Keypoint::new(1.0, 1.0); RAW_KEYPOINTS];
        assert!(augment(&raw, 0, (0, 10), 1.0).is_err());
        assert!(augment(&raw, 0, (10, 10), 1.5).is_err());
    }

    #[test]
    fn out_of_frame_points_are_clamped() {
        let raw = raw_with(
            &[(3, Keypoint::new(-4.0, 700.0))],
            Keypoint::new(10.0, 10.0),
        );
        let f = augment(&raw, 0, (640, 480), 1.0).unwrap();
        assert_eq!(f.keypoint(3), Keypoint::new(0.0, 480.0));
    }

    #[test]
    fn closed_box_containment() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert!(bbox_contains(&b, Keypoint::new(5.0, 5.0)));
        assert!(bbox_contains(&b, Keypoint::new(10.0, 10.0)));
        assert!(!bbox_contains(&b, Keypoint::new(11.0, 5.0)));
    }

    #[test]
    fn box_iou() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BoundingBox::new(5.0, 0.0, 15.0, 10.0);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-15);
        assert_eq!(a.iou(&a), 1.0);
        let far = BoundingBox::new(20.0, 20.0, 30.0, 30.0);
        assert_eq!(a.iou(&far), 0.0);
    }

    #[test]
    fn mirror_is_involution() {
        let raw: Vec<Keypoint> = (0..RAW_KEYPOINTS)
            .map(|i| Keypoint::new(10.0 * i as f64, 5.0 * i as f64))
            .collect();
        let f = augment(&raw, 3, (640, 480), 0.9).unwrap();
        assert_eq!(f.mirrored().mirrored(), f);
        assert_eq!(f.mirrored().keypoint(1).u, 630.0);
    }

    fn arb_raw() -> impl Strategy<Value = Vec<Keypoint>> {
        prop::collection::vec(
            (0.0..1280.0f64, 0.0..720.0f64).prop_map(|(u, v)| Keypoint::new(u, v)),
            RAW_KEYPOINTS,
        )
    }

    proptest! {
        #[test]
        fn box_encloses_all_points(raw in arb_raw()) {
            let f = augment(&raw, 0, (1280, 720), 1.0).unwrap();
            for p in f.keypoints() {
                prop_assert!(f.bbox().contains(*p));
            }
            let expected = Keypoint::midpoint(f.keypoint(5), f.keypoint(17));
            prop_assert_eq!(f.palm_anchor(), expected);
        }

        #[test]
        fn augment_is_pure(raw in arb_raw(), t in 0i64..1_000_000) {
            let a = augment(&raw, t, (1280, 720), 0.7).unwrap();
            let b = augment(&raw, t, (1280, 720), 0.7).unwrap();
            for (p, q) in a.keypoints().iter().zip(b.keypoints()) {
                prop_assert_eq!(p.u.to_bits(), q.u.to_bits());
                prop_assert_eq!(p.v.to_bits(), q.v.to_bits());
            }
        }
    }
}
