//! Single assistive switch: hold-duration classification into Cycle / Select.
//!
//! A press followed by a release is one input. The hold duration `d` decides
//! what it means:
//!
//! | hold `d` (s)      | result     |
//! |-------------------|------------|
//! | `d < 0.1`         | nothing    |
//! | `0.1 <= d < 1.0`  | Cycle      |
//! | `1.0 <= d <= 3.0` | Select     |
//! | `d > 3.0`         | nothing    |
//!
//! [`classify_hold`] is the only place these boundaries live. The state
//! machine uses it on release, and `tick` only drives the display message,
//! so the command for a press/release pair never depends on tick cadence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::CommandKind;
use crate::lines::Timestamped;
use crate::par::{self, Execution};

pub const MIN_HOLD: f64 = 0.1;
pub const SELECT_HOLD: f64 = 1.0;
pub const MAX_HOLD: f64 = 3.0;

pub const MSG_WAITING: &str = "Waiting for user input";
pub const MSG_NEXT: &str = "Going to send NEXT";
pub const MSG_SELECT: &str = "Going to send Select";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchEventKind {
    Press,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t: f64,
    pub kind: SwitchEventKind,
}

impl SwitchEvent {
    pub fn press(t: f64) -> Self {
        Self { t, kind: SwitchEventKind::Press }
    }

    pub fn release(t: f64) -> Self {
        Self { t, kind: SwitchEventKind::Release }
    }
}

impl Timestamped for SwitchEvent {
    fn timestamp(&self) -> f64 {
        self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SwitchState {
    #[default]
    Waiting,
    ArmedNext { pressed_at: f64 },
    ArmedSelect { pressed_at: f64 },
    /// Held past the select window; the eventual release does nothing.
    Expired { pressed_at: f64 },
}

impl SwitchState {
    pub fn pressed_at(&self) -> Option<f64> {
        match *self {
            SwitchState::Waiting => None,
            SwitchState::ArmedNext { pressed_at }
            | SwitchState::ArmedSelect { pressed_at }
            | SwitchState::Expired { pressed_at } => Some(pressed_at),
        }
    }

    pub fn message(&self) -> &'static str {
        match self {
            SwitchState::Waiting | SwitchState::Expired { .. } => MSG_WAITING,
            SwitchState::ArmedNext { .. } => MSG_NEXT,
            SwitchState::ArmedSelect { .. } => MSG_SELECT,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwitchError {
    #[error("press at t={t} while the switch is already pressed")]
    DoublePress { t: f64 },
    #[error("release at t={t} while the switch is not pressed")]
    ReleaseWithoutPress { t: f64 },
    #[error("event at t={t} precedes the press at t={pressed_at}")]
    TimeRegression { t: f64, pressed_at: f64 },
}

/// Command produced by a press held for `hold` seconds.
pub fn classify_hold(hold: f64) -> Option<CommandKind> {
    if hold < MIN_HOLD {
        None
    } else if hold < SELECT_HOLD {
        Some(CommandKind::Cycle)
    } else if hold <= MAX_HOLD {
        Some(CommandKind::Select)
    } else {
        None
    }
}

/// Classifies a batch of hold durations.
pub fn classify_holds(holds: &[f64], mode: Execution) -> Vec<Option<CommandKind>> {
    par::map(holds, mode, |&d| classify_hold(d))
}

pub fn on_event(
    state: SwitchState,
    event: SwitchEvent,
) -> Result<(SwitchState, Option<CommandKind>), SwitchError> {
    if let Some(pressed_at) = state.pressed_at() {
        if event.t < pressed_at {
            return Err(SwitchError::TimeRegression { t: event.t, pressed_at });
        }
    }
    match (state, event.kind) {
        (SwitchState::Waiting, SwitchEventKind::Press) => {
            Ok((SwitchState::ArmedNext { pressed_at: event.t }, None))
        }
        (SwitchState::Waiting, SwitchEventKind::Release) => {
            Err(SwitchError::ReleaseWithoutPress { t: event.t })
        }
        (_, SwitchEventKind::Press) => Err(SwitchError::DoublePress { t: event.t }),
        (SwitchState::Expired { .. }, SwitchEventKind::Release) => Ok((SwitchState::Waiting, None)),
        (
            SwitchState::ArmedNext { pressed_at } | SwitchState::ArmedSelect { pressed_at },
            SwitchEventKind::Release,
        ) => Ok((SwitchState::Waiting, classify_hold(event.t - pressed_at))),
    }
}

/// Advances the hold-time display and returns the message to show.
pub fn tick(state: SwitchState, now: f64) -> (SwitchState, &'static str) {
    let next = match state {
        SwitchState::ArmedNext { pressed_at } | SwitchState::ArmedSelect { pressed_at } => {
            let held = now - pressed_at;
            if held > MAX_HOLD {
                SwitchState::Expired { pressed_at }
            } else if held >= SELECT_HOLD {
                SwitchState::ArmedSelect { pressed_at }
            } else {
                state
            }
        }
        other => other,
    };
    (next, next.message())
}

/// Runs a whole event trace, returning the commands with their release times.
pub fn run_events(events: &[SwitchEvent]) -> Result<Vec<(f64, CommandKind)>, SwitchError> {
    let mut state = SwitchState::Waiting;
    let mut out = Vec::new();
    for &ev in events {
        let (next, cmd) = on_event(state, ev)?;
        state = next;
        if let Some(cmd) = cmd {
            out.push((ev.t, cmd));
        }
    }
    Ok(out)
}
