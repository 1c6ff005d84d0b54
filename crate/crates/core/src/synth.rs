//! Synthetic hands and traces: one constructed pose per gesture, the
//! look-alike poses the rules must reject, uniform random frames, and a
//! scripted operator session for replay and benchmarking.
//!
//! Poses are built on a fixed right-hand palm at 1280x720. Each digit is
//! given by its joint angle, the length from the pivot joint to the tip and
//! the side it bends toward, so fixture angles are exact by construction.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::landmark::{BoundingBox, Keypoint, RAW_KEYPOINTS};
use crate::rules::GestureLabel;
use crate::trace::{Trace, TraceFrame, TraceHeader};

pub const FRAME_DIMS: (u32, u32) = (1280, 720);
pub const FRAME_PERIOD_MS: i64 = 33;

const WRIST: Keypoint = Keypoint::new(640.0, 620.0);
const THUMB_CMC: Keypoint = Keypoint::new(575.0, 590.0);
const THUMB_MCP: Keypoint = Keypoint::new(530.0, 540.0);
const FOLDED_THUMB_IP: Keypoint = Keypoint::new(520.0, 470.0);
// (mcp, pip) for fore, middle, ring, pinky
const FINGER_BASE: [(Keypoint, Keypoint); 4] = [
    (Keypoint::new(580.0, 440.0), Keypoint::new(580.0, 370.0)),
    (Keypoint::new(635.0, 425.0), Keypoint::new(635.0, 345.0)),
    (Keypoint::new(690.0, 435.0), Keypoint::new(690.0, 365.0)),
    (Keypoint::new(740.0, 460.0), Keypoint::new(745.0, 405.0)),
];

/// One digit: interior angle at the pivot joint, pivot-to-tip length, and
/// rotation sense (+1 or -1, in image coordinates) from the proximal
/// direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Digit {
    pub angle_deg: f64,
    pub length_px: f64,
    pub sense: f64,
}

const fn digit(angle_deg: f64, length_px: f64, sense: f64) -> Digit {
    Digit {
        angle_deg,
        length_px,
        sense,
    }
}

const THUMB_FOLDED: Digit = digit(40.0, 110.0, -1.0);
const THUMB_OUT: Digit = digit(150.0, 120.0, 1.0);
const CURLED: [Digit; 4] = [
    digit(25.0, 120.0, -1.0),
    digit(25.0, 130.0, -1.0),
    digit(25.0, 120.0, 1.0),
    digit(20.0, 100.0, 1.0),
];
const EXTENDED: [Digit; 4] = [
    digit(175.0, 90.0, 1.0),
    digit(178.0, 95.0, 1.0),
    digit(178.0, 85.0, -1.0),
    digit(175.0, 70.0, -1.0),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose {
    pub thumb: Digit,
    /// Fore, middle, ring, pinky.
    pub fingers: [Digit; 4],
    /// Thumb IP joint; halfway along the thumb when absent.
    pub thumb_ip: Option<Keypoint>,
    /// Shortens the MCP-to-PIP segments, as a fist seen from the front.
    pub proximal_scale: f64,
}

fn rotate(d: Keypoint, deg: f64) -> Keypoint {
    let (s, c) = deg.to_radians().sin_cos();
    Keypoint::new(d.u * c - d.v * s, d.u * s + d.v * c)
}

fn place_tip(pivot: Keypoint, proximal: Keypoint, d: Digit) -> Keypoint {
    let (du, dv) = (proximal.u - pivot.u, proximal.v - pivot.v);
    let n = du.hypot(dv);
    let dir = rotate(Keypoint::new(du / n, dv / n), d.sense * d.angle_deg);
    Keypoint::new(pivot.u + d.length_px * dir.u, pivot.v + d.length_px * dir.v)
}

impl HandPose {
    pub fn new(thumb: Digit, fingers: [Digit; 4]) -> Self {
        Self {
            thumb,
            fingers,
            thumb_ip: None,
            proximal_scale: 1.0,
        }
    }

    fn folded(fingers: [Digit; 4]) -> Self {
        Self {
            thumb_ip: Some(FOLDED_THUMB_IP),
            ..Self::new(THUMB_FOLDED, fingers)
        }
    }

    /// The 21 landmarks in MediaPipe order.
    pub fn keypoints(&self) -> Vec<Keypoint> {
        let mut k = vec![Keypoint::default(); RAW_KEYPOINTS];
        k[0] = WRIST;
        k[1] = THUMB_CMC;
        k[2] = THUMB_MCP;
        k[4] = place_tip(THUMB_MCP, WRIST, self.thumb);
        k[3] = self
            .thumb_ip
            .unwrap_or_else(|| Keypoint::midpoint(k[2], k[4]));
        for (i, (&(mcp, pip), &d)) in FINGER_BASE.iter().zip(&self.fingers).enumerate() {
            let s = self.proximal_scale;
            let pip = Keypoint::new(mcp.u + s * (pip.u - mcp.u), mcp.v + s * (pip.v - mcp.v));
            let tip = place_tip(pip, mcp, d);
            let base = 5 + 4 * i;
            k[base] = mcp;
            k[base + 1] = pip;
            k[base + 2] = Keypoint::midpoint(pip, tip);
            k[base + 3] = tip;
        }
        k
    }
}

/// The constructed pose for a defined gesture.
pub fn gesture_pose(label: GestureLabel) -> Option<HandPose> {
    use GestureLabel::*;
    let [c0, c1, c2, c3] = CURLED;
    let [e0, e1, e2, e3] = EXTENDED;
    Some(match label {
        G0 => HandPose {
            proximal_scale: 0.5,
            ..HandPose::folded([
                digit(50.0, 110.0, -1.0),
                digit(50.0, 110.0, -1.0),
                digit(50.0, 110.0, 1.0),
                digit(40.0, 110.0, 1.0),
            ])
        },
        G1 => HandPose::folded([e0, c1, c2, c3]),
        G2 => HandPose::folded([e0, e1, c2, c3]),
        G3 => HandPose::folded([e0, e1, e2, c3]),
        G4 => HandPose::folded([e0, e1, e2, e3]),
        G5 => HandPose::new(
            digit(80.0, 100.0, 1.0),
            [
                digit(175.0, 90.0, 1.0),
                digit(170.0, 95.0, 1.0),
                digit(170.0, 85.0, -1.0),
                digit(160.0, 70.0, -1.0),
            ],
        ),
        G6 => HandPose::new(THUMB_OUT, [c0, c1, c2, e3]),
        G7 => HandPose::new(
            digit(120.0, 160.0, -1.0),
            [digit(165.0, 90.0, 1.0), digit(150.0, 130.0, -1.0), c2, c3],
        ),
        G8 => HandPose::new(THUMB_OUT, [e0, c1, c2, c3]),
        G9 => HandPose::folded([digit(100.0, 90.0, 1.0), c1, c2, c3]),
        Love => HandPose::new(THUMB_OUT, [e0, c1, c2, e3]),
        Rock => HandPose::folded([e0, c1, c2, e3]),
        Unrecognized => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confusable {
    TigerClaw,
    Good,
    Ok,
    NaturallyOpen,
    Gun,
}

impl Confusable {
    pub const ALL: [Confusable; 5] = [
        Confusable::TigerClaw,
        Confusable::Good,
        Confusable::Ok,
        Confusable::NaturallyOpen,
        Confusable::Gun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Confusable::TigerClaw => "tiger-claw",
            Confusable::Good => "good",
            Confusable::Ok => "ok",
            Confusable::NaturallyOpen => "naturally-open",
            Confusable::Gun => "gun",
        }
    }

    pub fn pose(self) -> HandPose {
        let [_, e1, e2, e3] = EXTENDED;
        let [_, _, c2, c3] = CURLED;
        match self {
            // every tip out, fingers hooked at about 100 degrees
            Confusable::TigerClaw => HandPose::new(
                THUMB_OUT,
                [
                    digit(100.0, 90.0, 1.0),
                    digit(100.0, 90.0, 1.0),
                    digit(100.0, 90.0, -1.0),
                    digit(100.0, 80.0, -1.0),
                ],
            ),
            Confusable::Good => HandPose::new(digit(150.0, 150.0, -1.0), CURLED),
            Confusable::Ok => HandPose::folded([digit(40.0, 100.0, -1.0), e1, e2, e3]),
            Confusable::NaturallyOpen => {
                HandPose::new(THUMB_OUT, [digit(165.0, 90.0, 1.0), e1, e2, e3])
            }
            // thumb, fore and middle out like G7, thumb far from the middle tip
            Confusable::Gun => HandPose::new(
                digit(170.0, 130.0, 1.0),
                [digit(165.0, 90.0, 1.0), digit(150.0, 130.0, -1.0), c2, c3],
            ),
        }
    }
}

/// Scales landmarks about their bounding-box centre by `scale` and moves
/// that centre to `center`.
pub fn place(points: &[Keypoint], scale: f64, center: Keypoint) -> Vec<Keypoint> {
    let b = BoundingBox::enclosing(points).expect("non-empty");
    let (cu, cv) = ((b.u_min + b.u_max) / 2.0, (b.v_min + b.v_max) / 2.0);
    points
        .iter()
        .map(|p| Keypoint::new(center.u + scale * (p.u - cu), center.v + scale * (p.v - cv)))
        .collect()
}

/// 21 keypoints uniform over the frame.
pub fn random_keypoints(rng: &mut impl Rng, (w, h): (u32, u32)) -> Vec<Keypoint> {
    (0..RAW_KEYPOINTS)
        .map(|_| Keypoint::new(rng.gen_range(0.0..=f64::from(w)), rng.gen_range(0.0..=f64::from(h))))
        .collect()
}

fn jitter(points: &[Keypoint], rng: &mut impl Rng, amplitude: f64) -> Vec<Keypoint> {
    points
        .iter()
        .map(|p| {
            Keypoint::new(
                p.u + rng.gen_range(-amplitude..=amplitude),
                p.v + rng.gen_range(-amplitude..=amplitude),
            )
        })
        .collect()
}

/// Hand scale that brings the built-in pose well inside the default press
/// depth; 1.0 keeps it well outside.
pub const PRESS_SCALE: f64 = 1.85;

/// Builds operator sessions: each gesture is shown, pushed toward the
/// camera, pulled back, then followed by idle frames while the motion runs.
pub struct SessionBuilder {
    rng: StdRng,
    frames: Vec<TraceFrame>,
    t_ms: i64,
    center: Keypoint,
}

impl SessionBuilder {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: StdRng::seed_from_u64(seed),
            frames: Vec::new(),
            t_ms: 0,
            center: Keypoint::new(f64::from(FRAME_DIMS.0) / 2.0, f64::from(FRAME_DIMS.1) / 2.0),
        }
    }

    fn push(&mut self, pose: &[Keypoint], scale: f64) {
        let pts = jitter(&place(pose, scale, self.center), &mut self.rng, 0.5);
        let conf = self.rng.gen_range(0.85..=1.0);
        self.frames.push(TraceFrame::from_keypoints(self.t_ms, &pts, conf));
        self.t_ms += FRAME_PERIOD_MS;
    }

    /// Shows `label`, presses and releases.
    pub fn command(&mut self, label: GestureLabel) -> &mut Self {
        let pose = gesture_pose(label).expect("defined gesture").keypoints();
        for _ in 0..4 {
            self.push(&pose, 1.0);
        }
        for _ in 0..4 {
            self.push(&pose, PRESS_SCALE);
        }
        for _ in 0..3 {
            self.push(&pose, 1.0);
        }
        self
    }

    /// Relaxed, unrecognised hand for `ms`.
    pub fn idle(&mut self, ms: i64) -> &mut Self {
        let pose = Confusable::NaturallyOpen.pose().keypoints();
        let end = self.t_ms + ms;
        while self.t_ms < end {
            self.push(&pose, 1.0);
        }
        self
    }

    /// No hand in view for `ms`.
    pub fn absent(&mut self, ms: i64) -> &mut Self {
        self.t_ms += ms;
        self
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn build(&self) -> Trace {
        let mut header = TraceHeader::new(FRAME_DIMS.0, FRAME_DIMS.1);
        header.focal_length_px = Some(910.0);
        Trace::new(header, self.frames.clone())
    }
}

/// A session that exercises every gesture and motion, repeated until it
/// holds `frames` frames.
pub fn benchmark_trace(frames: usize, seed: u64) -> Trace {
    use GestureLabel::*;
    let mut s = SessionBuilder::new(seed);
    while s.len() < frames {
        s.command(G0).idle(3_500);
        for g in [G1, G2, G3, G4] {
            s.command(g).idle(2_500);
        }
        s.command(G5).idle(5_000).command(G6).idle(6_500);
        for g in [G7, G8, G9] {
            s.command(g).idle(4_500);
        }
        s.command(Love).idle(3_500).command(Rock).idle(3_500);
        s.absent(1_000);
    }
    let mut t = s.build();
    t.frames.truncate(frames);
    t
}
