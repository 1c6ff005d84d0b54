//! The full per-frame pipeline and the deterministic trace replay.
//!
//! Per frame: augment → classify → depth → button → debounce/latch → state
//! machine → simulator. The simulator is driven by the caller's clock, which
//! in replay is the frame timestamp.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, EngineConfig};
use crate::depth::{
    estimate_depth, AnchorProfile, ButtonEdge, ButtonState, CameraModel, VirtualButton,
};
use crate::fsm::{ApplyOutcome, FsmSnapshot, GaitFsm, RejectReason};
use crate::landmark::Keypoint;
use crate::pipeline::CommandPipeline;
use crate::rules::{Classifier, GestureLabel};
use crate::sim::{ExoSimulator, GaitEvent, JointPose};
use crate::trace::{Trace, TraceFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t_ms: f64,
    #[serde(flatten)]
    pub event: GaitEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub gesture: GestureLabel,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
}

/// Everything that happened while processing one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub t_ms: i64,
    pub label: GestureLabel,
    pub stable_label: Option<GestureLabel>,
    pub depth_cm: Option<f64>,
    pub button: ButtonState,
    pub edge: ButtonEdge,
    pub command: Option<CommandRecord>,
    pub fsm: FsmSnapshot,
    pub pose: JointPose,
    /// Simulator events up to and including this frame, without progress
    /// ticks.
    pub events: Vec<TimedEvent>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<String>,
}

/// One line of an `*.events.jsonl` log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Frame(FrameReport),
    Drain {
        t_ms: f64,
        fsm: FsmSnapshot,
        pose: JointPose,
        events: Vec<TimedEvent>,
    },
}

pub struct Engine {
    classifier: Classifier,
    camera: CameraModel,
    anchor: AnchorProfile,
    button: Option<VirtualButton>,
    button_center: Option<Keypoint>,
    half_extent_px: f64,
    depth_threshold_cm: f64,
    release_margin_cm: f64,
    pipeline: CommandPipeline,
    fsm: GaitFsm,
    sim: ExoSimulator,
    drain_ms: i64,
}

impl Engine {
    pub fn new(cfg: &EngineConfig) -> Result<Self, ConfigError> {
        Ok(Self {
            classifier: Classifier::new(cfg.rule_table(), cfg.rules.mirror_u),
            camera: cfg.camera()?,
            anchor: cfg.anchor_profile()?,
            button: None,
            button_center: cfg.button.center_uv.map(Keypoint::from),
            half_extent_px: cfg.button.half_extent_px,
            depth_threshold_cm: cfg.button.depth_threshold_cm,
            release_margin_cm: cfg.button.release_margin_cm,
            pipeline: CommandPipeline::new(cfg.pipeline.gap_reset_ms),
            fsm: GaitFsm::new(),
            sim: ExoSimulator::new(cfg.gait_library()?, cfg.sim.tick_rate_hz)?,
            drain_ms: cfg.sim.drain_ms,
        })
    }

    pub fn set_camera(&mut self, camera: CameraModel) {
        self.camera = camera;
    }

    pub fn set_anchor(&mut self, anchor: AnchorProfile) {
        self.anchor = anchor;
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    pub fn fsm(&self) -> &GaitFsm {
        &self.fsm
    }

    pub fn pose(&self) -> JointPose {
        self.sim.pose()
    }

    pub fn button_state(&self) -> ButtonState {
        self.button.as_ref().map_or(ButtonState::Released, |b| b.state())
    }

    pub fn stable_label(&self) -> Option<GestureLabel> {
        self.pipeline.stable_label()
    }

    pub fn is_idle(&self) -> bool {
        !self.sim.is_active() && !self.fsm.is_executing()
    }

    fn button_for(&mut self, dims: (u32, u32)) -> &mut VirtualButton {
        let center = self
            .button_center
            .unwrap_or_else(|| Keypoint::new(f64::from(dims.0) / 2.0, f64::from(dims.1) / 2.0));
        let (half, threshold, margin) = (
            self.half_extent_px,
            self.depth_threshold_cm,
            self.release_margin_cm,
        );
        self.button.get_or_insert_with(|| {
            VirtualButton::new(center, half, threshold).with_release_margin(margin)
        })
    }

    /// Runs the simulator up to `now_ms`, chaining follow-on motions that
    /// the state machine requests when a motion completes.
    pub fn tick(&mut self, now_ms: f64) -> Vec<TimedEvent> {
        let mut events = Vec::new();
        loop {
            let mut completed_at = None;
            for s in self.sim.advance_to(now_ms) {
                if let GaitEvent::Completed { .. } = s.event {
                    completed_at = Some(s.t_ms);
                }
                if !matches!(s.event, GaitEvent::Progress { .. }) {
                    events.push(TimedEvent {
                        t_ms: s.t_ms,
                        event: s.event,
                    });
                }
            }
            let Some(t) = completed_at else { break };
            let next = self.fsm.on_gait_complete().and_then(|c| c.motion);
            match next {
                Some(motion) => self.start_motion(motion, t, &mut events),
                None => break,
            }
        }
        events
    }

    fn start_motion(&mut self, motion: crate::fsm::Motion, t_ms: f64, events: &mut Vec<TimedEvent>) {
        match self.sim.start(motion, t_ms) {
            Ok(s) => events.push(TimedEvent {
                t_ms: s.t_ms,
                event: s.event,
            }),
            Err(e) => {
                // a motion the library cannot play leaves the machine stuck;
                // halting is the safe outcome
                tracing::error!(error = %e, "cannot start motion; halting");
                self.fsm.estop();
            }
        }
    }

    /// Processes one landmark frame observed at `now_ms` on the simulator
    /// clock.
    pub fn process_frame(&mut self, frame: &TraceFrame, dims: (u32, u32), now_ms: f64) -> FrameReport {
        let mut events = self.tick(now_ms);
        let mut errors = Vec::new();
        let report = |engine: &Self, label, depth_cm, edge, command, events, errors| FrameReport {
            t_ms: frame.t_ms,
            label,
            stable_label: engine.pipeline.stable_label(),
            depth_cm,
            button: engine.button_state(),
            edge,
            command,
            fsm: engine.fsm.snapshot(),
            pose: engine.sim.pose(),
            events,
            errors,
        };

        let hand = match frame.to_hand_frame(dims) {
            Ok(h) => h,
            Err(e) => {
                errors.push(format!("landmarks: {e}"));
                return report(self, GestureLabel::Unrecognized, None, ButtonEdge::None, None, events, errors);
            }
        };
        let label = self.classifier.classify(&hand);
        let depth = match estimate_depth(&hand, &self.camera, &self.anchor) {
            Ok(d) => Some(d),
            Err(e) => {
                errors.push(format!("depth: {e}"));
                None
            }
        };
        let edge = self.button_for(dims).update(&hand, depth.as_ref());
        let command = self.pipeline.step(label, edge, frame.t_ms).map(|cmd| {
            let outcome = self.fsm.apply(&cmd);
            if let ApplyOutcome::Accepted(_) = &outcome {
                if !self.sim.is_active() {
                    if let Some(m) = self.fsm.motion() {
                        self.start_motion(m, now_ms, &mut events);
                    }
                }
            }
            CommandRecord {
                gesture: cmd.source_gesture,
                accepted: outcome.is_accepted(),
                reason: match outcome {
                    ApplyOutcome::Rejected(r) => Some(r),
                    ApplyOutcome::Accepted(_) => None,
                },
            }
        });
        report(self, label, depth.map(|d| d.depth_cm), edge, command, events, errors)
    }

    /// Emergency stop: aborts any motion and halts the state machine.
    pub fn emergency_stop(&mut self, now_ms: f64) -> (FsmSnapshot, Vec<TimedEvent>) {
        let mut events = self.tick(now_ms);
        self.pipeline.emergency_stop(now_ms as i64);
        let snapshot = self.fsm.estop();
        if let Some(s) = self.sim.abort(now_ms) {
            events.push(TimedEvent {
                t_ms: s.t_ms,
                event: s.event,
            });
        }
        (snapshot, events)
    }

    /// Lets the simulator run on after the input ends, until idle or
    /// `drain_ms` later.
    pub fn drain(&mut self, from_ms: f64) -> LogRecord {
        let end = from_ms + self.drain_ms as f64;
        let mut events = Vec::new();
        let mut t = from_ms;
        while !self.is_idle() && t < end {
            t = (t + 1000.0).min(end);
            events.extend(self.tick(t));
        }
        LogRecord::Drain {
            t_ms: t,
            fsm: self.fsm.snapshot(),
            pose: self.sim.pose(),
            events,
        }
    }
}

/// Replays a trace through a fresh engine and returns the log records.
pub fn replay(trace: &Trace, cfg: &EngineConfig) -> Result<Vec<LogRecord>, ConfigError> {
    let mut engine = Engine::new(cfg)?;
    if let Some(f) = trace.header.focal_length_px {
        engine.set_camera(CameraModel::new(f)?);
    }
    if let Some(p) = trace.header.profile {
        engine.set_anchor(p);
    }
    let dims = trace.header.dims();
    let mut out: Vec<LogRecord> = trace
        .frames
        .iter()
        .map(|f| LogRecord::Frame(engine.process_frame(f, dims, f.t_ms as f64)))
        .collect();
    let last = trace.frames.last().map_or(0.0, |f| f.t_ms as f64);
    out.push(engine.drain(last));
    Ok(out)
}

pub fn write_log(mut w: impl Write, records: &[LogRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Replays and serialises in one step.
pub fn replay_to_string(trace: &Trace, cfg: &EngineConfig) -> Result<String, ConfigError> {
    let records = replay(trace, cfg)?;
    let mut buf = Vec::new();
    write_log(&mut buf, &records).expect("writing to memory");
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// All commands issued during a replay, in order.
pub fn commands(records: &[LogRecord]) -> Vec<&CommandRecord> {
    records
        .iter()
        .filter_map(|r| match r {
            LogRecord::Frame(f) => f.command.as_ref(),
            LogRecord::Drain { .. } => None,
        })
        .collect()
}

/// All simulator events of a replay, in order.
pub fn sim_events(records: &[LogRecord]) -> Vec<&TimedEvent> {
    records
        .iter()
        .flat_map(|r| match r {
            LogRecord::Frame(f) => f.events.iter(),
            LogRecord::Drain { events, .. } => events.iter(),
        })
        .collect()
}
