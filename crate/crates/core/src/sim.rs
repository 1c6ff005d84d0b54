//! Simulated exoskeleton: plays gait profiles as hip/knee trajectories.
//!
//! Poses are cosine-interpolated between keyframes and sampled on a fixed
//! tick grid measured from the start of each execution. Time is whatever
//! the caller passes in, so replays and tests run on a virtual clock.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::Motion;

/// The bundled gait profiles as JSON.
pub const DEFAULT_PROFILES: &str = include_str!("../data/gait_profiles.json");
pub const DEFAULT_TICK_RATE_HZ: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointPose {
    pub hip_left: f64,
    pub knee_left: f64,
    pub hip_right: f64,
    pub knee_right: f64,
}

impl JointPose {
    fn to_array(self) -> [f64; 4] {
        [self.hip_left, self.knee_left, self.hip_right, self.knee_right]
    }

    fn from_array([hip_left, knee_left, hip_right, knee_right]: [f64; 4]) -> Self {
        Self {
            hip_left,
            knee_left,
            hip_right,
            knee_right,
        }
    }

    /// Largest absolute per-joint difference.
    pub fn max_abs_diff(&self, other: &JointPose) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn blend(a: JointPose, b: JointPose, w: f64) -> JointPose {
        let (a, b) = (a.to_array(), b.to_array());
        JointPose::from_array(std::array::from_fn(|i| a[i] + (b[i] - a[i]) * w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub hip_deg: [f64; 2],
    pub knee_deg: [f64; 2],
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            hip_deg: [-20.0, 100.0],
            knee_deg: [0.0, 100.0],
        }
    }
}

impl JointLimits {
    pub fn admits(&self, p: &JointPose) -> bool {
        let within = |x: f64, [lo, hi]: [f64; 2]| (lo..=hi).contains(&x);
        within(p.hip_left, self.hip_deg)
            && within(p.hip_right, self.hip_deg)
            && within(p.knee_left, self.knee_deg)
            && within(p.knee_right, self.knee_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub phase: f64,
    pub pose: JointPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitProfile {
    pub name: String,
    pub duration_ms: u32,
    pub keyframes: Vec<Keyframe>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("profile {name}: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("no gait profile named {0:?}")]
    UnknownProfile(String),
    #[error("an execution is already active")]
    Busy,
    #[error("tick rate must be positive and finite")]
    TickRate,
    #[error("invalid gait profile JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn cosine_weight(s: f64) -> f64 {
    (1.0 - (PI * s).cos()) / 2.0
}

impl GaitProfile {
    pub fn validate(&self, limits: &JointLimits) -> Result<(), SimError> {
        let bad = |reason: &str| SimError::InvalidProfile {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.duration_ms == 0 {
            return Err(bad("duration must be positive"));
        }
        if self.keyframes.len() < 2 {
            return Err(bad("needs at least two keyframes"));
        }
        if self.keyframes[0].phase != 0.0 || self.keyframes.last().map(|k| k.phase) != Some(1.0) {
            return Err(bad("keyframe phases must start at 0 and end at 1"));
        }
        if !self.keyframes.windows(2).all(|w| w[0].phase < w[1].phase) {
            return Err(bad("keyframe phases must be strictly increasing"));
        }
        if let Some(k) = self.keyframes.iter().find(|k| !limits.admits(&k.pose)) {
            return Err(bad(&format!("pose at phase {} exceeds joint limits", k.phase)));
        }
        Ok(())
    }

    /// Pose at `phase` in [0, 1].
    pub fn pose_at(&self, phase: f64) -> JointPose {
        pose_between(&self.keyframes, phase)
    }

    /// Largest per-joint change between adjacent keyframes, and the shortest
    /// keyframe segment in milliseconds.
    pub fn max_gap_and_min_segment_ms(&self) -> (f64, f64) {
        let mut gap: f64 = 0.0;
        let mut seg = f64::INFINITY;
        for w in self.keyframes.windows(2) {
            gap = gap.max(w[0].pose.max_abs_diff(&w[1].pose));
            seg = seg.min((w[1].phase - w[0].phase) * f64::from(self.duration_ms));
        }
        (gap, seg)
    }
}

fn pose_between(keyframes: &[Keyframe], phase: f64) -> JointPose {
    let phase = phase.clamp(0.0, 1.0);
    let i = keyframes
        .windows(2)
        .position(|w| phase <= w[1].phase)
        .unwrap_or(keyframes.len() - 2);
    let (a, b) = (keyframes[i], keyframes[i + 1]);
    let s = (phase - a.phase) / (b.phase - a.phase);
    JointPose::blend(a.pose, b.pose, cosine_weight(s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaitEvent {
    Started { profile: String },
    Progress { fraction: f64 },
    Completed { profile: String },
    Aborted { profile: String },
}

impl GaitEvent {
    pub fn is_terminal(&self) -> bool {
        matches!(self, GaitEvent::Completed { .. } | GaitEvent::Aborted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSample {
    pub t_ms: f64,
    pub pose: JointPose,
    pub event: GaitEvent,
}

/// One profile being played from `start_ms`.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    name: String,
    keyframes: Vec<Keyframe>,
    duration_ms: f64,
    tick_ms: f64,
    start_ms: f64,
    last_tick: u64,
    next_tick: u64,
    last_pose: JointPose,
    finished: bool,
}

impl Execution {
    /// Starts `profile`. With `from`, the first keyframe is replaced by that
    /// pose so the trajectory begins where the legs actually are.
    pub fn new(
        profile: &GaitProfile,
        tick_rate_hz: f64,
        start_ms: f64,
        from: Option<JointPose>,
    ) -> Result<Self, SimError> {
        if !(tick_rate_hz.is_finite() && tick_rate_hz > 0.0) {
            return Err(SimError::TickRate);
        }
        let mut keyframes = profile.keyframes.clone();
        if let Some(p) = from {
            keyframes[0].pose = p;
        }
        let duration_ms = f64::from(profile.duration_ms);
        let tick_ms = 1000.0 / tick_rate_hz;
        let last_tick = (duration_ms / tick_ms - 1e-9).ceil().max(1.0) as u64;
        Ok(Self {
            name: profile.name.clone(),
            last_pose: keyframes[0].pose,
            keyframes,
            duration_ms,
            tick_ms,
            start_ms,
            last_tick,
            next_tick: 0,
            finished: false,
        })
    }

    pub fn profile_name(&self) -> &str {
        &self.name
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn last_pose(&self) -> JointPose {
        self.last_pose
    }

    /// Samples in the whole execution, both endpoints included.
    pub fn sample_count(&self) -> u64 {
        self.last_tick + 1
    }

    fn tick_time(&self, k: u64) -> f64 {
        if k >= self.last_tick {
            self.start_ms + self.duration_ms
        } else {
            self.start_ms + k as f64 * self.tick_ms
        }
    }

    fn sample(&mut self, k: u64) -> SimSample {
        let fraction = if k >= self.last_tick {
            1.0
        } else {
            (k as f64 * self.tick_ms / self.duration_ms).min(1.0)
        };
        let pose = pose_between(&self.keyframes, fraction);
        self.last_pose = pose;
        let event = if k == 0 {
            GaitEvent::Started {
                profile: self.name.clone(),
            }
        } else if k >= self.last_tick {
            self.finished = true;
            GaitEvent::Completed {
                profile: self.name.clone(),
            }
        } else {
            GaitEvent::Progress { fraction }
        };
        SimSample {
            t_ms: self.tick_time(k),
            pose,
            event,
        }
    }

    /// Every sample due at or before `t_ms`.
    pub fn advance_to(&mut self, t_ms: f64) -> Vec<SimSample> {
        let mut out = Vec::new();
        while !self.finished && self.tick_time(self.next_tick) <= t_ms {
            let k = self.next_tick;
            self.next_tick += 1;
            out.push(self.sample(k));
        }
        out
    }

    pub fn run_to_end(&mut self) -> Vec<SimSample> {
        self.advance_to(f64::INFINITY)
    }

    /// Stops the execution, freezing the pose. `None` if already finished.
    pub fn abort(&mut self, t_ms: f64) -> Option<SimSample> {
        if self.finished {
            return None;
        }
        self.finished = true;
        Some(SimSample {
            t_ms,
            pose: self.last_pose,
            event: GaitEvent::Aborted {
                profile: self.name.clone(),
            },
        })
    }
}

/// Profile lookup by name.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitLibrary {
    profiles: BTreeMap<String, GaitProfile>,
}

#[derive(Deserialize, Serialize)]
struct LibraryDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    profiles: Vec<GaitProfile>,
}

impl Default for GaitLibrary {
    fn default() -> Self {
        Self::from_json(DEFAULT_PROFILES, &JointLimits::default())
            .expect("bundled gait profiles are valid")
    }
}

impl GaitLibrary {
    pub fn from_json(text: &str, limits: &JointLimits) -> Result<Self, SimError> {
        let doc: LibraryDoc = serde_json::from_str(text)?;
        let mut profiles = BTreeMap::new();
        for p in doc.profiles {
            p.validate(limits)?;
            profiles.insert(p.name.clone(), p);
        }
        Ok(Self { profiles })
    }

    pub fn get(&self, name: &str) -> Result<&GaitProfile, SimError> {
        self.profiles
            .get(name)
            .ok_or_else(|| SimError::UnknownProfile(name.to_string()))
    }

    pub fn profile_for(&self, motion: Motion) -> Result<&GaitProfile, SimError> {
        self.get(motion.profile_name())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }
}

/// Single-execution simulator mirroring the gait lockout.
#[derive(Debug, Clone)]
pub struct ExoSimulator {
    library: GaitLibrary,
    tick_rate_hz: f64,
    active: Option<Execution>,
    pose: JointPose,
}

impl ExoSimulator {
    pub fn new(library: GaitLibrary, tick_rate_hz: f64) -> Result<Self, SimError> {
        if !(tick_rate_hz.is_finite() && tick_rate_hz > 0.0) {
            return Err(SimError::TickRate);
        }
        Ok(Self {
            library,
            tick_rate_hz,
            active: None,
            pose: JointPose {
                knee_left: 10.0,
                knee_right: 10.0,
                ..JointPose::default()
            },
        })
    }

    pub fn pose(&self) -> JointPose {
        self.pose
    }

    pub fn is_active(&self) -> bool {
        self.active.is_some()
    }

    pub fn active_profile(&self) -> Option<&str> {
        self.active.as_ref().map(Execution::profile_name)
    }

    /// Begins a motion and returns its `Started` sample.
    pub fn start(&mut self, motion: Motion, now_ms: f64) -> Result<SimSample, SimError> {
        if self.active.is_some() {
            return Err(SimError::Busy);
        }
        let profile = self.library.profile_for(motion)?;
        let mut exec = Execution::new(profile, self.tick_rate_hz, now_ms, Some(self.pose))?;
        let first = exec
            .advance_to(now_ms)
            .into_iter()
            .next()
            .expect("first tick is due at the start time");
        self.pose = first.pose;
        self.active = Some(exec);
        Ok(first)
    }

    /// Advances the active execution to `t_ms`. The execution is cleared
    /// once it completes; the last returned sample is then `Completed`.
    pub fn advance_to(&mut self, t_ms: f64) -> Vec<SimSample> {
        let Some(exec) = self.active.as_mut() else {
            return Vec::new();
        };
        let out = exec.advance_to(t_ms);
        self.pose = exec.last_pose();
        if exec.is_finished() {
            self.active = None;
        }
        out
    }

    /// Aborts the active execution; no-op when idle.
    pub fn abort(&mut self, t_ms: f64) -> Option<SimSample> {
        let sample = self.active.take()?.abort(t_ms)?;
        self.pose = sample.pose;
        Some(sample)
    }
}
