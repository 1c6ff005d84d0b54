//! Gait state machine.
//!
//! Eight exoskeleton states, twelve gesture-triggered transitions, a lockout
//! while a gait is executing, and an emergency stop that halts the machine
//! until it is re-initialised with gesture 0.
//!
//! Continuous walking is a mode over the shared left/right-forward states:
//! the machine keeps alternating steps on its own until a stop gesture is
//! accepted, which takes effect when the in-flight step completes.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pipeline::GaitCommand;
use crate::rules::GestureLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitState {
    Unpowered,
    Standing,
    Sitting,
    RightForward,
    LeftForward,
    RightHighStep,
    RightLowStep,
    RightObstacle,
}

impl GaitState {
    pub const ALL: [GaitState; 8] = [
        GaitState::Unpowered,
        GaitState::Standing,
        GaitState::Sitting,
        GaitState::RightForward,
        GaitState::LeftForward,
        GaitState::RightHighStep,
        GaitState::RightLowStep,
        GaitState::RightObstacle,
    ];
}

impl fmt::Display for GaitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    None,
    StepByStep,
    Continuous,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::None, Mode::StepByStep, Mode::Continuous];
}

/// Joint trajectory executed while entering a state. Names match the
/// simulator's gait profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    PowerOn,
    SitDown,
    StandUp,
    RightStepStart,
    LeftStep,
    RightStep,
    Retract,
    StairAscent,
    StairDescent,
    ObstacleCross,
}

impl Motion {
    pub fn profile_name(self) -> &'static str {
        match self {
            Motion::PowerOn => "power_on",
            Motion::SitDown => "sit_down",
            Motion::StandUp => "stand_up",
            Motion::RightStepStart => "right_step_start",
            Motion::LeftStep => "left_step",
            Motion::RightStep => "right_step",
            Motion::Retract => "retract",
            Motion::StairAscent => "stair_ascent",
            Motion::StairDescent => "stair_descent",
            Motion::ObstacleCross => "obstacle_cross",
        }
    }

    pub const ALL: [Motion; 10] = [
        Motion::PowerOn,
        Motion::SitDown,
        Motion::StandUp,
        Motion::RightStepStart,
        Motion::LeftStep,
        Motion::RightStep,
        Motion::Retract,
        Motion::StairAscent,
        Motion::StairDescent,
        Motion::ObstacleCross,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub state: GaitState,
    pub motion: Motion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStart {
    Immediately,
    /// Queued until the in-flight continuous-walking step completes.
    AtCycleBoundary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitPlan {
    pub phases: Vec<Phase>,
    /// State reached when the last phase completes.
    pub final_state: GaitState,
    /// Mode while the plan runs.
    pub mode: Mode,
    pub start: PlanStart,
}

impl GaitPlan {
    fn single(state: GaitState, motion: Motion, mode: Mode) -> Self {
        Self {
            phases: vec![Phase { state, motion }],
            final_state: state,
            mode,
            start: PlanStart::Immediately,
        }
    }

    fn returning(state: GaitState, motion: Motion) -> Self {
        Self {
            phases: vec![Phase { state, motion }],
            final_state: GaitState::Standing,
            mode: Mode::None,
            start: PlanStart::Immediately,
        }
    }

    /// Visited states in order, ending with the resting state.
    pub fn states(&self) -> Vec<GaitState> {
        let mut out: Vec<GaitState> = self.phases.iter().map(|p| p.state).collect();
        if out.last() != Some(&self.final_state) {
            out.push(self.final_state);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Busy,
    Halted,
    InvalidTransition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyOutcome {
    Accepted(GaitPlan),
    Rejected(RejectReason),
}

impl ApplyOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, ApplyOutcome::Accepted(_))
    }
}

/// The transition table: (state, mode, gesture) → plan.
pub fn transition(state: GaitState, mode: Mode, gesture: GestureLabel) -> Option<GaitPlan> {
    use GaitState as S;
    use GestureLabel as G;
    Some(match (state, mode, gesture) {
        (S::Unpowered, Mode::None, G::G0) => GaitPlan::single(S::Standing, Motion::PowerOn, Mode::None),
        (S::Sitting, Mode::None, G::Rock) => GaitPlan::single(S::Standing, Motion::StandUp, Mode::None),
        (S::Standing, Mode::None, G::Love) => GaitPlan::single(S::Sitting, Motion::SitDown, Mode::None),
        (S::Standing, Mode::None, G::G1) => {
            GaitPlan::single(S::RightForward, Motion::RightStepStart, Mode::StepByStep)
        }
        (S::RightForward, Mode::StepByStep, G::G2) => {
            GaitPlan::single(S::LeftForward, Motion::LeftStep, Mode::StepByStep)
        }
        (S::LeftForward, Mode::StepByStep, G::G3) => {
            GaitPlan::single(S::RightForward, Motion::RightStep, Mode::StepByStep)
        }
        (S::RightForward, Mode::StepByStep, G::G4) => {
            GaitPlan::single(S::Standing, Motion::Retract, Mode::None)
        }
        (S::Standing, Mode::None, G::G5) => {
            GaitPlan::single(S::LeftForward, Motion::LeftStep, Mode::Continuous)
        }
        (S::LeftForward | S::RightForward, Mode::Continuous, G::G6) => {
            GaitPlan::single(S::Standing, Motion::Retract, Mode::None)
        }
        (S::Standing, Mode::None, G::G7) => GaitPlan::returning(S::RightHighStep, Motion::StairAscent),
        (S::Standing, Mode::None, G::G8) => GaitPlan::returning(S::RightLowStep, Motion::StairDescent),
        (S::Standing, Mode::None, G::G9) => GaitPlan::returning(S::RightObstacle, Motion::ObstacleCross),
        _ => return None,
    })
}

/// What the machine asks the actuator to do after a step completes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepChange {
    pub state: GaitState,
    /// Next motion to execute, `None` when the plan has ended.
    pub motion: Option<Motion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmSnapshot {
    pub state: GaitState,
    pub mode: Mode,
    pub executing: bool,
    pub halted: bool,
    pub motion: Option<Motion>,
    pub stop_pending: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaitFsm {
    state: GaitState,
    mode: Mode,
    executing: bool,
    halted: bool,
    motion: Option<Motion>,
    queue: VecDeque<Phase>,
    final_state: GaitState,
    stop_pending: bool,
}

impl Default for GaitFsm {
    fn default() -> Self {
        Self::new()
    }
}

impl GaitFsm {
    pub fn new() -> Self {
        Self::at(GaitState::Unpowered, Mode::None)
    }

    /// An idle machine in an arbitrary (state, mode) pair.
    pub fn at(state: GaitState, mode: Mode) -> Self {
        Self {
            state,
            mode,
            executing: false,
            halted: false,
            motion: None,
            queue: VecDeque::new(),
            final_state: state,
            stop_pending: false,
        }
    }

    pub fn state(&self) -> GaitState {
        self.state
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_executing(&self) -> bool {
        self.executing
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn motion(&self) -> Option<Motion> {
        self.motion
    }

    pub fn snapshot(&self) -> FsmSnapshot {
        FsmSnapshot {
            state: self.state,
            mode: self.mode,
            executing: self.executing,
            halted: self.halted,
            motion: self.motion,
            stop_pending: self.stop_pending,
        }
    }

    pub fn apply(&mut self, command: &GaitCommand) -> ApplyOutcome {
        self.apply_gesture(command.source_gesture)
    }

    pub fn apply_gesture(&mut self, gesture: GestureLabel) -> ApplyOutcome {
        if self.halted {
            if !(gesture == GestureLabel::G0 && self.state == GaitState::Unpowered) {
                return ApplyOutcome::Rejected(RejectReason::Halted);
            }
            self.halted = false;
        }
        if self.executing {
            if self.mode == Mode::Continuous && gesture == GestureLabel::G6 && !self.stop_pending {
                let mut plan = transition(self.state, self.mode, gesture)
                    .expect("continuous walking always has a stop transition");
                plan.start = PlanStart::AtCycleBoundary;
                self.stop_pending = true;
                return ApplyOutcome::Accepted(plan);
            }
            return ApplyOutcome::Rejected(RejectReason::Busy);
        }
        match transition(self.state, self.mode, gesture) {
            Some(plan) => {
                self.begin(&plan);
                ApplyOutcome::Accepted(plan)
            }
            None => ApplyOutcome::Rejected(RejectReason::InvalidTransition),
        }
    }

    fn begin(&mut self, plan: &GaitPlan) {
        let mut phases: VecDeque<Phase> = plan.phases.iter().copied().collect();
        let first = phases.pop_front().expect("plans have at least one phase");
        self.state = first.state;
        self.motion = Some(first.motion);
        self.queue = phases;
        self.final_state = plan.final_state;
        self.mode = plan.mode;
        self.executing = true;
        self.stop_pending = false;
    }

    /// Advances past the motion that just finished. No-op when idle.
    pub fn on_gait_complete(&mut self) -> Option<StepChange> {
        if !self.executing {
            return None;
        }
        if let Some(next) = self.queue.pop_front() {
            self.state = next.state;
            self.motion = Some(next.motion);
        } else if self.mode == Mode::Continuous {
            if self.stop_pending {
                let plan = transition(self.state, Mode::Continuous, GestureLabel::G6)
                    .expect("continuous walking always has a stop transition");
                self.begin(&plan);
            } else {
                let (state, motion) = match self.state {
                    GaitState::LeftForward => (GaitState::RightForward, Motion::RightStep),
                    _ => (GaitState::LeftForward, Motion::LeftStep),
                };
                self.state = state;
                self.final_state = state;
                self.motion = Some(motion);
            }
        } else {
            self.state = self.final_state;
            self.motion = None;
            self.executing = false;
        }
        Some(StepChange {
            state: self.state,
            motion: self.motion,
        })
    }

    /// Halts immediately: the remaining plan is discarded and the machine
    /// drops to `Unpowered`; only gesture 0 resumes.
    pub fn estop(&mut self) -> FsmSnapshot {
        self.halted = true;
        self.executing = false;
        self.motion = None;
        self.queue.clear();
        self.stop_pending = false;
        self.mode = Mode::None;
        self.state = GaitState::Unpowered;
        self.final_state = GaitState::Unpowered;
        self.snapshot()
    }
}
