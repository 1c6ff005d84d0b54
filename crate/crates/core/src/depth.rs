//! Monocular hand depth and the virtual-button trigger.
//!
//! Depth follows the pinhole relation `D = f * H / h`: `h` is the pixel
//! length of the index-to-pinky knuckle segment (keypoints 5 and 17), `H`
//! its real length, taken as three quarters of the user's palm width.
//! Tilting the hand only shortens `h`, so posture errors push the estimate
//! farther away and can release the button but never press it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry;
use crate::landmark::{HandFrame, Keypoint, INDEX_MCP, PINKY_MCP};

/// Knuckle segment length as a fraction of palm width.
pub const ANCHOR_FRACTION: f64 = 0.75;
pub const DEFAULT_DEPTH_THRESHOLD_CM: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DepthError {
    #[error("focal length must be positive and finite, got {0}")]
    FocalLength(f64),
    #[error("anchor size must be positive and finite, got {0}")]
    AnchorSize(f64),
    #[error("knuckle segment has zero pixel length; depth undefined")]
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_length_px: f64,
}

impl CameraModel {
    pub fn new(focal_length_px: f64) -> Result<Self, DepthError> {
        if focal_length_px.is_finite() && focal_length_px > 0.0 {
            Ok(Self { focal_length_px })
        } else {
            Err(DepthError::FocalLength(focal_length_px))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    #[default]
    Unspecified,
}

/// One row of the palm-width lookup: users of `gender` shorter than
/// `below_height_cm` get `palm_width_cm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PalmWidthBand {
    pub gender: Gender,
    pub below_height_cm: f64,
    pub palm_width_cm: f64,
}

/// Gender x height band → palm width.
///
/// The shipped values are illustrative placeholders for a proper
/// anthropometric survey table and should be replaced by site data or a
/// measured `palm_width_cm` override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalmWidthTable {
    pub bands: Vec<PalmWidthBand>,
}

impl Default for PalmWidthTable {
    fn default() -> Self {
        let band = |gender, below_height_cm, palm_width_cm| PalmWidthBand {
            gender,
            below_height_cm,
            palm_width_cm,
        };
        Self {
            bands: vec![
                band(Gender::Male, 165.0, 8.1),
                band(Gender::Male, 175.0, 8.4),
                band(Gender::Male, f64::INFINITY, 8.8),
                band(Gender::Female, 155.0, 7.3),
                band(Gender::Female, 165.0, 7.6),
                band(Gender::Female, f64::INFINITY, 7.9),
                band(Gender::Unspecified, 160.0, 7.7),
                band(Gender::Unspecified, 170.0, 8.0),
                band(Gender::Unspecified, f64::INFINITY, 8.4),
            ],
        }
    }
}

impl PalmWidthTable {
    pub fn lookup(&self, gender: Gender, height_cm: f64) -> Option<f64> {
        self.bands
            .iter()
            .filter(|b| b.gender == gender && height_cm < b.below_height_cm)
            .min_by(|a, b| a.below_height_cm.total_cmp(&b.below_height_cm))
            .map(|b| b.palm_width_cm)
    }
}

/// Real-world size of the depth anchor for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorProfile {
    pub gender: Gender,
    pub height_cm: f64,
    pub palm_width_cm: f64,
    pub anchor_cm: f64,
}

impl AnchorProfile {
    /// Palm width from `override_cm` if given, otherwise from the table.
    pub fn for_user(
        gender: Gender,
        height_cm: f64,
        override_cm: Option<f64>,
        table: &PalmWidthTable,
    ) -> Result<Self, DepthError> {
        let palm = override_cm
            .or_else(|| table.lookup(gender, height_cm))
            .unwrap_or(f64::NAN);
        Self::from_palm_width(gender, height_cm, palm)
    }

    pub fn from_palm_width(
        gender: Gender,
        height_cm: f64,
        palm_width_cm: f64,
    ) -> Result<Self, DepthError> {
        let anchor_cm = ANCHOR_FRACTION * palm_width_cm;
        if !(anchor_cm.is_finite() && anchor_cm > 0.0) {
            return Err(DepthError::AnchorSize(anchor_cm));
        }
        Ok(Self {
            gender,
            height_cm,
            palm_width_cm,
            anchor_cm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthEstimate {
    pub depth_cm: f64,
    pub anchor_px: f64,
}

/// `D = f * H / h`.
pub fn depth_from_pixels(focal_length_px: f64, anchor_cm: f64, anchor_px: f64) -> Option<f64> {
    (anchor_px > 0.0).then(|| focal_length_px * anchor_cm / anchor_px)
}

pub fn estimate_depth(
    frame: &HandFrame,
    camera: &CameraModel,
    profile: &AnchorProfile,
) -> Result<DepthEstimate, DepthError> {
    let anchor_px = geometry::pixel_distance(frame, INDEX_MCP, PINKY_MCP);
    let depth_cm = depth_from_pixels(camera.focal_length_px, profile.anchor_cm, anchor_px)
        .ok_or(DepthError::Undefined)?;
    Ok(DepthEstimate {
        depth_cm,
        anchor_px,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ButtonState {
    Pressed,
    #[default]
    Released,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ButtonEdge {
    #[default]
    None,
    Press,
    Release,
}

/// Screen-space square button pressed by a near hand covering its centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualButton {
    pub center: Keypoint,
    /// Drawn size only; triggering uses the centre point.
    pub half_extent_px: f64,
    pub depth_threshold_cm: f64,
    /// Extra distance a pressed button tolerates before releasing.
    pub release_margin_cm: f64,
    state: ButtonState,
}

impl VirtualButton {
    pub fn new(center: Keypoint, half_extent_px: f64, depth_threshold_cm: f64) -> Self {
        Self {
            center,
            half_extent_px,
            depth_threshold_cm,
            release_margin_cm: 0.0,
            state: ButtonState::Released,
        }
    }

    pub fn with_release_margin(mut self, margin_cm: f64) -> Self {
        self.release_margin_cm = margin_cm.max(0.0);
        self
    }

    pub fn state(&self) -> ButtonState {
        self.state
    }

    /// Whether this frame satisfies both press conditions.
    pub fn would_press(&self, frame: &HandFrame, depth: Option<&DepthEstimate>) -> bool {
        let limit = match self.state {
            ButtonState::Pressed => self.depth_threshold_cm + self.release_margin_cm,
            ButtonState::Released => self.depth_threshold_cm,
        };
        depth.is_some_and(|d| d.depth_cm < limit) && frame.bbox().contains(self.center)
    }

    pub fn update(&mut self, frame: &HandFrame, depth: Option<&DepthEstimate>) -> ButtonEdge {
        let next = if self.would_press(frame, depth) {
            ButtonState::Pressed
        } else {
            ButtonState::Released
        };
        self.transition(next)
    }

    /// Forces the released state, e.g. when the hand is lost.
    pub fn release(&mut self) -> ButtonEdge {
        self.transition(ButtonState::Released)
    }

    fn transition(&mut self, next: ButtonState) -> ButtonEdge {
        let edge = match (self.state, next) {
            (ButtonState::Released, ButtonState::Pressed) => ButtonEdge::Press,
            (ButtonState::Pressed, ButtonState::Released) => ButtonEdge::Release,
            _ => ButtonEdge::None,
        };
        self.state = next;
        edge
    }
}
