//! Property checks that compare the implementation against the oracles.
//! Each returns a short summary on success and the first counterexample on
//! failure.

use gestgait_core::depth::ButtonEdge;
use gestgait_core::fsm::{ApplyOutcome, GaitFsm, GaitState, Mode, RejectReason};
use gestgait_core::metrics::average_precision;
use gestgait_core::pipeline::CommandPipeline;
use gestgait_core::rules::GestureLabel;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ap_oracle, debounce_oracle, enumerate_datasets, fsm_oracle};

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

/// All 8 states x 3 modes x (12 gestures + e-stop) against the oracle.
pub fn fsm_sweep() -> Result<usize, String> {
    let mut cells = 0;
    for state in GaitState::ALL {
        for mode in Mode::ALL {
            for g in GestureLabel::DEFINED {
                cells += 1;
                let mut fsm = GaitFsm::at(state, mode);
                let out = fsm.apply_gesture(g);
                match (fsm_oracle(state, mode, g), out) {
                    (None, ApplyOutcome::Rejected(RejectReason::InvalidTransition)) => {
                        ensure!(
                            (fsm.state(), fsm.mode(), fsm.is_executing()) == (state, mode, false),
                            "{state:?}/{mode:?}/{g}: rejected but machine changed"
                        );
                    }
                    (Some(cell), ApplyOutcome::Accepted(plan)) => {
                        ensure!(
                            plan.states() == cell.visits && fsm.mode() == cell.mode,
                            "{state:?}/{mode:?}/{g}: plan {:?} in {:?}, oracle {:?}",
                            plan.states(),
                            fsm.mode(),
                            cell
                        );
                        fsm.on_gait_complete();
                        let rest = if cell.mode == Mode::Continuous {
                            GaitState::RightForward
                        } else {
                            *cell.visits.last().unwrap()
                        };
                        ensure!(
                            fsm.state() == rest,
                            "{state:?}/{mode:?}/{g}: after the first motion in {:?}",
                            fsm.state()
                        );
                    }
                    (cell, out) => {
                        return Err(format!("{state:?}/{mode:?}/{g}: got {out:?}, oracle {cell:?}"))
                    }
                }
            }
            cells += 1;
            let s = GaitFsm::at(state, mode).estop();
            ensure!(
                s.halted && !s.executing && s.state == GaitState::Unpowered,
                "{state:?}/{mode:?}/estop: {s:?}"
            );
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Gesture(GestureLabel),
    Complete,
    EStop,
}

fn random_action(rng: &mut impl Rng) -> Action {
    match rng.gen_range(0..20) {
        0 => Action::EStop,
        1..=6 => Action::Complete,
        _ => {
            let i = rng.gen_range(0..=GestureLabel::DEFINED.len());
            Action::Gesture(
                GestureLabel::DEFINED
                    .get(i)
                    .copied()
                    .unwrap_or(GestureLabel::Unrecognized),
            )
        }
    }
}

/// A random command sequence checked for single-state, lockout and
/// halt-within-one-step after every step.
pub fn fsm_fuzz(seed: u64, steps: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fsm = GaitFsm::new();
    for step in 0..steps {
        let action = random_action(&mut rng);
        let before = fsm.snapshot();
        let at = format!("seed {seed} step {step} {action:?} from {before:?}");
        match action {
            Action::EStop => {
                let s = fsm.estop();
                ensure!(s.halted && !s.executing && s.motion.is_none(), "{at}: not halted");
            }
            Action::Complete => {
                let change = fsm.on_gait_complete();
                if !before.executing {
                    ensure!(change.is_none() && fsm.snapshot() == before, "{at}: idle machine moved");
                }
            }
            Action::Gesture(g) => {
                let out = fsm.apply_gesture(g);
                let after = fsm.snapshot();
                let resumes = g == GestureLabel::G0 && before.state == GaitState::Unpowered;
                if before.halted && !resumes {
                    ensure!(
                        out == ApplyOutcome::Rejected(RejectReason::Halted) && after == before,
                        "{at}: halted machine took {out:?}"
                    );
                } else if before.executing {
                    let stop_request =
                        before.mode == Mode::Continuous && g == GestureLabel::G6 && !before.stop_pending;
                    if stop_request {
                        ensure!(
                            out.is_accepted()
                                && (after.state, after.motion) == (before.state, before.motion)
                                && after.stop_pending,
                            "{at}: stop request {out:?}"
                        );
                    } else {
                        ensure!(
                            out == ApplyOutcome::Rejected(RejectReason::Busy) && after == before,
                            "{at}: lockout broken by {out:?}"
                        );
                    }
                } else {
                    let cell = fsm_oracle(before.state, before.mode, g);
                    ensure!(out.is_accepted() == cell.is_some(), "{at}: {out:?} vs oracle {cell:?}");
                    match cell {
                        Some(c) => ensure!(
                            after.state == c.visits[0] && after.mode == c.mode,
                            "{at}: entered {after:?}, oracle {c:?}"
                        ),
                        None => ensure!(after == before, "{at}: rejected but changed"),
                    }
                }
            }
        }
        let s = fsm.snapshot();
        ensure!(s.executing == s.motion.is_some(), "seed {seed} step {step}: {s:?}");
        ensure!(!(s.halted && s.executing), "seed {seed} step {step}: halted while executing");
        if s.mode == Mode::Continuous {
            ensure!(
                matches!(s.state, GaitState::LeftForward | GaitState::RightForward),
                "seed {seed} step {step}: continuous in {:?}",
                s.state
            );
        }
    }
    Ok(())
}

pub const DEBOUNCE_ALPHABET: [GestureLabel; 3] =
    [GestureLabel::G1, GestureLabel::G2, GestureLabel::Unrecognized];

fn sequences<T: Copy>(symbols: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| {
                symbols.iter().map(move |&x| {
                    let mut t = s.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    out
}

/// Edge sequences a real button can produce: presses and releases
/// alternate, starting released.
fn edge_sequences(n: usize) -> Vec<Vec<ButtonEdge>> {
    sequences(&[false, true], n)
        .into_iter()
        .map(|pressed| {
            let mut prev = false;
            pressed
                .into_iter()
                .map(|p| {
                    let e = match (prev, p) {
                        (false, true) => ButtonEdge::Press,
                        (true, false) => ButtonEdge::Release,
                        _ => ButtonEdge::None,
                    };
                    prev = p;
                    e
                })
                .collect()
        })
        .collect()
}

/// Every label sequence of length <= 6 over three symbols, under every
/// valid button edge sequence.
pub fn debounce_exhaustive() -> Result<usize, String> {
    let mut checked = 0;
    for n in 0..=6 {
        let all_edges = edge_sequences(n);
        for labels in sequences(&DEBOUNCE_ALPHABET, n) {
            for edges in &all_edges {
                let mut p = CommandPipeline::default();
                let got: Vec<(usize, GestureLabel)> = labels
                    .iter()
                    .zip(edges)
                    .enumerate()
                    .filter_map(|(i, (&l, &e))| {
                        p.step(l, e, 33 * i as i64).map(|c| (i, c.source_gesture))
                    })
                    .collect();
                ensure!(
                    got == debounce_oracle(&labels, edges),
                    "{labels:?} {edges:?}: got {got:?}"
                );
                for &(i, g) in &got {
                    let backed = (2..i).any(|p| {
                        edges[p] == ButtonEdge::Press && labels[p - 2..=p].iter().all(|&l| l == g)
                    });
                    ensure!(backed, "{labels:?} {edges:?}: {g} without three in a row");
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// AP against the counting oracle on every enumerated dataset, with
/// records shuffled.
pub fn ap_enumeration(tolerance: f64) -> Result<usize, String> {
    let (a, b) = (GestureLabel::G2, GestureLabel::Rock);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sets = enumerate_datasets(8, a, b);
    for mut recs in sets.iter().cloned() {
        recs.shuffle(&mut rng);
        for class in [a, b] {
            let (got, want) = (average_precision(&recs, class), ap_oracle(&recs, class));
            let same = match (got, want) {
                (Some(g), Some(w)) => (g - w).abs() <= tolerance,
                (g, w) => g == w,
            };
            ensure!(same, "{class}: {got:?} vs oracle {want:?} on {recs:?}");
        }
    }
    Ok(sets.len())
}
