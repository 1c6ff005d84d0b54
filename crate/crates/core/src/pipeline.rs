//! Gesture debouncing and the press-then-release command protocol.
//!
//! A gesture becomes stable after appearing in three consecutive frames.
//! The stable gesture present at the button's press edge is latched, and
//! the command is issued when the button is released.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::depth::ButtonEdge;
use crate::rules::GestureLabel;

pub const DEBOUNCE_FRAMES: usize = 3;
pub const DEFAULT_GAP_RESET_MS: i64 = 500;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Debouncer {
    window: VecDeque<GestureLabel>,
    last_ms: Option<i64>,
    gap_reset_ms: i64,
}

impl Default for Debouncer {
    fn default() -> Self {
        Self::new(DEFAULT_GAP_RESET_MS)
    }
}

impl Debouncer {
    pub fn new(gap_reset_ms: i64) -> Self {
        Self {
            window: VecDeque::with_capacity(DEBOUNCE_FRAMES),
            last_ms: None,
            gap_reset_ms,
        }
    }

    pub fn push(&mut self, label: GestureLabel, timestamp_ms: i64) {
        if let Some(prev) = self.last_ms {
            if timestamp_ms - prev > self.gap_reset_ms {
                self.window.clear();
            }
        }
        self.last_ms = Some(timestamp_ms);
        if self.window.len() == DEBOUNCE_FRAMES {
            self.window.pop_front();
        }
        self.window.push_back(label);
    }

    /// Set iff the last three labels are identical and defined.
    pub fn stable_label(&self) -> Option<GestureLabel> {
        let first = *self.window.front()?;
        (self.window.len() == DEBOUNCE_FRAMES
            && first.is_defined()
            && self.window.iter().all(|&l| l == first))
        .then_some(first)
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.last_ms = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitCommand {
    pub source_gesture: GestureLabel,
    pub issued_at_ms: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EStopCommand {
    pub issued_at_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandPipeline {
    debouncer: Debouncer,
    latched: Option<GestureLabel>,
}

impl CommandPipeline {
    pub fn new(gap_reset_ms: i64) -> Self {
        Self {
            debouncer: Debouncer::new(gap_reset_ms),
            latched: None,
        }
    }

    pub fn stable_label(&self) -> Option<GestureLabel> {
        self.debouncer.stable_label()
    }

    pub fn latched(&self) -> Option<GestureLabel> {
        self.latched
    }

    /// Feeds one frame's label and button edge.
    pub fn step(
        &mut self,
        label: GestureLabel,
        edge: ButtonEdge,
        timestamp_ms: i64,
    ) -> Option<GaitCommand> {
        self.debouncer.push(label, timestamp_ms);
        match edge {
            ButtonEdge::Press => {
                self.latched = self.debouncer.stable_label();
                None
            }
            ButtonEdge::Release => self.latched.take().map(|g| GaitCommand {
                source_gesture: g,
                issued_at_ms: timestamp_ms,
            }),
            ButtonEdge::None => None,
        }
    }

    /// Bypasses debounce and latch; always emits.
    pub fn emergency_stop(&mut self, timestamp_ms: i64) -> EStopCommand {
        self.latched = None;
        EStopCommand {
            issued_at_ms: timestamp_ms,
        }
    }

    pub fn reset(&mut self) {
        self.debouncer.reset();
        self.latched = None;
    }
}
