//! One controller's processing pipeline, independent of the transport.

use gestgait_core::config::{ConfigError, EngineConfig};
use gestgait_core::depth::{AnchorProfile, CameraModel, PalmWidthTable};
use gestgait_core::engine::{Engine, FrameReport, TimedEvent};
use gestgait_core::landmark::RAW_KEYPOINTS;
use gestgait_core::trace::TraceFrame;

use crate::protocol::{ErrorCode, Hello, SessionMsg, TelemetryMsg};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitingHello,
    Open { dims: (u32, u32), normalized: bool },
    Closed,
}

/// Synchronous session: every call returns the telemetry it produced, in
/// order. The simulator runs on the caller's clock.
pub struct ControlSession {
    engine: Engine,
    phase: Phase,
}

fn event_msgs(events: Vec<TimedEvent>) -> impl Iterator<Item = TelemetryMsg> {
    events.into_iter().map(|e| TelemetryMsg::Event {
        t_ms: e.t_ms,
        event: e.event,
    })
}

impl ControlSession {
    pub fn new(cfg: &EngineConfig) -> Result<Self, ConfigError> {
        Ok(Self {
            engine: Engine::new(cfg)?,
            phase: Phase::AwaitingHello,
        })
    }

    pub fn is_open(&self) -> bool {
        matches!(self.phase, Phase::Open { .. })
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn process(&mut self, msg: SessionMsg, now_ms: f64) -> Vec<TelemetryMsg> {
        match (msg, self.phase) {
            (_, Phase::Closed) => vec![TelemetryMsg::error(ErrorCode::ProtocolOrder, "session closed")],
            (SessionMsg::Hello(h), Phase::AwaitingHello) => self.hello(&h),
            (SessionMsg::Hello(_), _) => vec![TelemetryMsg::error(ErrorCode::ProtocolOrder, "already joined")],
            (SessionMsg::Frame(_), Phase::AwaitingHello) => {
                vec![TelemetryMsg::error(ErrorCode::ProtocolOrder, "frame before hello")]
            }
            (SessionMsg::Frame(f), Phase::Open { dims, normalized }) => self.frame(f, dims, normalized, now_ms),
            (SessionMsg::Estop, Phase::AwaitingHello) => {
                vec![TelemetryMsg::error(ErrorCode::ProtocolOrder, "estop before hello")]
            }
            (SessionMsg::Estop, Phase::Open { .. }) => self.estop(now_ms),
            (SessionMsg::Bye, _) => {
                self.phase = Phase::Closed;
                Vec::new()
            }
        }
    }

    /// Advances the simulator to `now_ms` without a frame.
    pub fn tick(&mut self, now_ms: f64) -> Vec<TelemetryMsg> {
        if !self.is_open() {
            return Vec::new();
        }
        event_msgs(self.engine.tick(now_ms)).collect()
    }

    fn hello(&mut self, h: &Hello) -> Vec<TelemetryMsg> {
        if h.frame_width == 0 || h.frame_height == 0 {
            return vec![TelemetryMsg::error(
                ErrorCode::Malformed,
                format!("frame size {}x{}", h.frame_width, h.frame_height),
            )];
        }
        if let Some(cam) = &h.camera {
            match CameraModel::new(cam.focal_length_px) {
                Ok(c) => self.engine.set_camera(c),
                Err(e) => return vec![TelemetryMsg::error(ErrorCode::Malformed, e.to_string())],
            }
        }
        if let Some(user) = &h.profile {
            match AnchorProfile::for_user(
                user.gender,
                user.height_cm,
                user.palm_width_cm,
                &PalmWidthTable::default(),
            ) {
                Ok(p) => self.engine.set_anchor(p),
                Err(e) => return vec![TelemetryMsg::error(ErrorCode::Malformed, e.to_string())],
            }
        }
        self.phase = Phase::Open {
            dims: (h.frame_width, h.frame_height),
            normalized: h.normalized,
        };
        vec![TelemetryMsg::Joined { role: h.role }]
    }

    fn frame(&mut self, mut f: TraceFrame, dims: (u32, u32), normalized: bool, now_ms: f64) -> Vec<TelemetryMsg> {
        if f.landmarks.len() != RAW_KEYPOINTS {
            return vec![TelemetryMsg::error(
                ErrorCode::InvalidFrame,
                format!("expected {RAW_KEYPOINTS} landmarks, got {}", f.landmarks.len()),
            )];
        }
        if normalized {
            f.denormalize(dims);
        }
        // events due before this frame come first, so the command's own
        // events follow its acknowledgement
        let mut out: Vec<TelemetryMsg> = event_msgs(self.engine.tick(now_ms)).collect();
        let report = self.engine.process_frame(&f, dims, now_ms);
        out.extend(
            report
                .errors
                .iter()
                .map(|e| TelemetryMsg::error(ErrorCode::InvalidFrame, e.clone())),
        );
        if let Some(c) = &report.command {
            out.push(TelemetryMsg::CommandAck {
                gesture: c.gesture,
                accepted: c.accepted,
                reason: c.reason,
            });
        }
        out.extend(event_msgs(report.events.clone()));
        out.push(state_msg(&report));
        out
    }

    fn estop(&mut self, now_ms: f64) -> Vec<TelemetryMsg> {
        let (snap, events) = self.engine.emergency_stop(now_ms);
        let mut out: Vec<TelemetryMsg> = event_msgs(events).collect();
        out.push(TelemetryMsg::State {
            t_ms: None,
            label: gestgait_core::GestureLabel::Unrecognized,
            stable_label: self.engine.stable_label(),
            depth_cm: None,
            button: self.engine.button_state(),
            fsm_state: snap.state,
            mode: snap.mode,
            executing: snap.executing,
            halted: snap.halted,
            joint_pose: self.engine.pose(),
        });
        out
    }
}

fn state_msg(r: &FrameReport) -> TelemetryMsg {
    TelemetryMsg::State {
        t_ms: Some(r.t_ms),
        label: r.label,
        stable_label: r.stable_label,
        depth_cm: r.depth_cm,
        button: r.button,
        fsm_state: r.fsm.state,
        mode: r.fsm.mode,
        executing: r.fsm.executing,
        halted: r.fsm.halted,
        joint_pose: r.pose,
    }
}
