//! JSON messages exchanged over the control channel. Every payload is an
//! object with a `"type"` discriminator; server messages also carry a
//! per-connection `seq` that starts at 0 and has no gaps.

use gestgait_core::config::{CameraConfig, UserConfig};
use gestgait_core::depth::ButtonState;
use gestgait_core::fsm::{GaitState, Mode, RejectReason};
use gestgait_core::rules::GestureLabel;
use gestgait_core::sim::{GaitEvent, JointPose};
use gestgait_core::trace::TraceFrame;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Controller,
    Observer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    #[serde(default)]
    pub role: Role,
    /// Overrides the configured user for depth estimation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<UserConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraConfig>,
    pub frame_width: u32,
    pub frame_height: u32,
    /// Landmarks arrive as fractions of the frame size.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalized: bool,
}

impl Hello {
    pub fn controller(frame_width: u32, frame_height: u32) -> Self {
        Self {
            role: Role::Controller,
            profile: None,
            camera: None,
            frame_width,
            frame_height,
            normalized: false,
        }
    }

    pub fn observer() -> Self {
        Self {
            role: Role::Observer,
            ..Self::controller(0, 0)
        }
    }
}

/// Client to server. A frame is a trace frame line plus the discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionMsg {
    Hello(Hello),
    Frame(TraceFrame),
    Estop,
    Bye,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    ControllerBusy,
    ProtocolOrder,
    Malformed,
    InvalidFrame,
    Internal,
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TelemetryMsg {
    /// Reply to a successful hello.
    Joined { role: Role },
    State {
        /// Timestamp of the frame this state follows; absent after an
        /// e-stop.
        t_ms: Option<i64>,
        label: GestureLabel,
        stable_label: Option<GestureLabel>,
        depth_cm: Option<f64>,
        button: ButtonState,
        fsm_state: GaitState,
        mode: Mode,
        executing: bool,
        halted: bool,
        joint_pose: JointPose,
    },
    CommandAck {
        gesture: GestureLabel,
        accepted: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<RejectReason>,
    },
    Event {
        /// Simulator clock time of the event.
        t_ms: f64,
        #[serde(flatten)]
        event: GaitEvent,
    },
    Error { code: ErrorCode, detail: String },
}

impl TelemetryMsg {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        TelemetryMsg::Error {
            code,
            detail: detail.into(),
        }
    }
}

/// A telemetry message as sent on one connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    #[serde(flatten)]
    pub msg: TelemetryMsg,
}
