//! Geometric measurements over a [`HandFrame`].
//!
//! Two fixed palm polygons (the inner and outer recognition hulls) are used
//! to locate each fingertip; per-finger joint angles measure flexion, and
//! pixel distances between fingertips disambiguate look-alike poses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmark::{HandFrame, Keypoint, FINGERTIPS};

/// Vertex order of the inner recognition hull.
pub const INNER_HULL: [usize; 7] = [0, 1, 2, 5, 9, 13, 17];
/// Vertex order of the outer recognition hull.
pub const OUTER_HULL: [usize; 9] = [0, 1, 2, 3, 6, 10, 14, 18, 17];

/// Points closer than this to a polygon edge count as on the edge.
pub const EDGE_TOLERANCE_PX: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Thumb,
    Forefinger,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Forefinger,
        Finger::Middle,
        Finger::Ring,
        Finger::Pinky,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tip(self) -> usize {
        FINGERTIPS[self.index()]
    }

    pub fn joint_angle_spec(self) -> JointAngleSpec {
        let (pivot, proximal, distal) = match self {
            Finger::Thumb => (2, 0, 4),
            Finger::Forefinger => (6, 5, 8),
            Finger::Middle => (10, 9, 12),
            Finger::Ring => (14, 13, 16),
            Finger::Pinky => (18, 17, 20),
        };
        JointAngleSpec {
            finger: self,
            pivot,
            proximal,
            distal,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Forefinger => "forefinger",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Pinky => "pinky",
        }
    }
}

/// The three keypoints whose angle measures a finger's flexion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointAngleSpec {
    pub finger: Finger,
    pub pivot: usize,
    pub proximal: usize,
    pub distal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HullMembership {
    Inner,
    Between,
    Outside,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{finger:?} joint angle undefined: coincident keypoints at pivot {pivot}")]
    DegenerateAngle { finger: Finger, pivot: usize },
    #[error("fingertip {tip} lies inside the inner hull but outside the outer hull")]
    HullContainment { tip: usize },
    #[error("distance ratio undefined: zero-length denominator {0:?}")]
    RatioUndefined((usize, usize)),
}

/// Interior angle at `pivot` between the rays to `a` and `b`, in degrees.
///
/// Evaluated as `atan2(|a x b|, a . b)`, which equals the arccos of the
/// normalised dot product but keeps full precision near 0 and 180 degrees.
pub fn angle_at(pivot: Keypoint, a: Keypoint, b: Keypoint) -> Option<f64> {
    let (ax, ay) = (a.u - pivot.u, a.v - pivot.v);
    let (bx, by) = (b.u - pivot.u, b.v - pivot.v);
    if (ax == 0.0 && ay == 0.0) || (bx == 0.0 && by == 0.0) {
        return None;
    }
    let cross = ax * by - ay * bx;
    let dot = ax * bx + ay * by;
    Some(cross.abs().atan2(dot).to_degrees())
}

/// Flexion angle of `finger`; 180 degrees is a straight finger.
pub fn joint_angle(frame: &HandFrame, finger: Finger) -> Result<f64, GeometryError> {
    let spec = finger.joint_angle_spec();
    angle_at(
        frame.keypoint(spec.pivot),
        frame.keypoint(spec.proximal),
        frame.keypoint(spec.distal),
    )
    .ok_or(GeometryError::DegenerateAngle {
        finger,
        pivot: spec.pivot,
    })
}

fn on_segment(p: Keypoint, a: Keypoint, b: Keypoint) -> bool {
    let (dx, dy) = (b.u - a.u, b.v - a.v);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.u - a.u) * dx + (p.v - a.v) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.u + t * dx - p.u, a.v + t * dy - p.v);
    (cx * cx + cy * cy).sqrt() <= EDGE_TOLERANCE_PX
}

/// Even-odd ray-crossing test over an implicitly closed vertex list.
/// Points on an edge (within [`EDGE_TOLERANCE_PX`]) are inside.
pub fn point_in_polygon_points(vertices: &[Keypoint], p: Keypoint) -> bool {
    let n = vertices.len();
    if n == 0 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[j], vertices[i]);
        if on_segment(p, a, b) {
            return true;
        }
        if (b.v > p.v) != (a.v > p.v) {
            let u_cross = b.u + (p.v - b.v) * (a.u - b.u) / (a.v - b.v);
            if p.u < u_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Polygon test with vertices taken from the frame by keypoint index.
pub fn point_in_polygon(frame: &HandFrame, polygon: &[usize], point: Keypoint) -> bool {
    debug_assert!(polygon.len() >= 3);
    let vertices: Vec<Keypoint> = polygon.iter().map(|&i| frame.keypoint(i)).collect();
    point_in_polygon_points(&vertices, point)
}

/// Location of each fingertip (thumb → pinky) relative to the two hulls.
pub fn hull_membership(frame: &HandFrame) -> Result<[HullMembership; 5], GeometryError> {
    let inner: Vec<Keypoint> = INNER_HULL.iter().map(|&i| frame.keypoint(i)).collect();
    let outer: Vec<Keypoint> = OUTER_HULL.iter().map(|&i| frame.keypoint(i)).collect();
    let mut out = [HullMembership::Outside; 5];
    for (slot, &tip) in out.iter_mut().zip(FINGERTIPS.iter()) {
        let p = frame.keypoint(tip);
        let in_inner = point_in_polygon_points(&inner, p);
        let in_outer = point_in_polygon_points(&outer, p);
        *slot = match (in_inner, in_outer) {
            (true, true) => HullMembership::Inner,
            (true, false) => return Err(GeometryError::HullContainment { tip }),
            (false, true) => HullMembership::Between,
            (false, false) => HullMembership::Outside,
        };
    }
    Ok(out)
}

pub fn distance(a: Keypoint, b: Keypoint) -> f64 {
    let (du, dv) = (b.u - a.u, b.v - a.v);
    (du * du + dv * dv).sqrt()
}

/// Euclidean distance in pixels between two keypoints of the frame.
pub fn pixel_distance(frame: &HandFrame, i: usize, j: usize) -> f64 {
    distance(frame.keypoint(i), frame.keypoint(j))
}

pub fn distance_ratio(
    frame: &HandFrame,
    numerator: (usize, usize),
    denominator: (usize, usize),
) -> Result<f64, GeometryError> {
    let den = pixel_distance(frame, denominator.0, denominator.1);
    if den == 0.0 {
        return Err(GeometryError::RatioUndefined(denominator));
    }
    Ok(pixel_distance(frame, numerator.0, numerator.1) / den)
}
