//! Gesture-driven gait control for a simulated lower-limb exoskeleton.
//!
//! Hand landmarks from a monocular camera are classified into twelve
//! gestures by convex-hull and joint-angle rules. A virtual button pressed
//! by moving the hand toward the camera turns a stable gesture into a gait
//! command, which a state machine with execution lockout and emergency stop
//! maps onto simulated joint trajectories.

pub mod config;
pub mod depth;
pub mod engine;
pub mod fsm;
pub mod geometry;
pub mod landmark;
pub mod metrics;
pub mod pipeline;
pub mod rules;
pub mod sim;
pub mod synth;
pub mod trace;

pub use config::EngineConfig;
pub use engine::{replay, Engine, FrameReport, LogRecord};
pub use landmark::{augment, HandFrame, Keypoint};
pub use rules::{Classifier, GestureLabel, RuleTable};
