//! Four-phase pausable grasp execution: Approach, Grasp, Lift, Place.

use serde::{Deserialize, Serialize};

use super::grasp::GraspId;
use super::scene::{ObjectId, Pose};
use crate::signal::TIME_EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecPhase {
    Approach,
    Grasp,
    Lift,
    Place,
}

impl ExecPhase {
    pub const ALL: [ExecPhase; 4] =
        [ExecPhase::Approach, ExecPhase::Grasp, ExecPhase::Lift, ExecPhase::Place];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub grasp: GraspId,
    pub object: ObjectId,
    /// Seconds per phase, in [`ExecPhase::ALL`] order.
    pub durations: [f64; 4],
    /// Back-off distance above the grasp before moving in, mm.
    pub standoff: f64,
    pub lift_height: f64,
    pub place_pose: Pose,
}

impl ExecutionPlan {
    pub fn total_duration(&self) -> f64 {
        self.durations.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseEventKind {
    Started { phase: ExecPhase },
    Progress { phase: ExecPhase, fraction: f64 },
    Finished { success: bool, failed_phase: Option<ExecPhase> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: PhaseEventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltOutcome {
    Halted,
    /// The halt landed on the final release step and takes effect after it.
    Deferred,
}

/// Rounds to the nanosecond so repeated `+= dt` stays on a clean grid.
pub fn snap(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

/// Execution of one plan.
///
/// `fails[i]` decides up front whether phase `i` fails when it completes,
/// so a run is fully determined by the plan and the draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub plan: ExecutionPlan,
    fails: [bool; 4],
    phase: usize,
    elapsed: f64,
    halted: bool,
    halt_deferred: bool,
    finished: bool,
}

impl Execution {
    pub fn start(plan: ExecutionPlan, fails: [bool; 4], t: f64) -> (Self, PhaseEvent) {
        let exec = Self {
            plan,
            fails,
            phase: 0,
            elapsed: 0.0,
            halted: false,
            halt_deferred: false,
            finished: false,
        };
        let ev = PhaseEvent { t, kind: PhaseEventKind::Started { phase: ExecPhase::Approach } };
        (exec, ev)
    }

    pub fn phase(&self) -> ExecPhase {
        ExecPhase::ALL[self.phase]
    }

    pub fn fraction(&self) -> f64 {
        (self.elapsed / self.plan.durations[self.phase]).min(1.0)
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn on_final_step(&self, dt: f64) -> bool {
        self.phase() == ExecPhase::Place
            && self.plan.durations[self.phase] - self.elapsed <= dt + TIME_EPSILON
    }

    pub fn halt(&mut self, dt: f64) -> HaltOutcome {
        if self.on_final_step(dt) {
            self.halt_deferred = true;
            HaltOutcome::Deferred
        } else {
            self.halted = true;
            HaltOutcome::Halted
        }
    }

    pub fn resume(&mut self) {
        self.halted = false;
        self.halt_deferred = false;
    }

    /// Advances by `dt`; `t` is the clock after the step.
    pub fn step(&mut self, t: f64, dt: f64) -> Vec<PhaseEvent> {
        if self.halted || self.finished {
            return Vec::new();
        }
        let mut out = Vec::new();
        let phase = self.phase();
        let duration = self.plan.durations[self.phase];
        self.elapsed = snap(self.elapsed + dt);
        out.push(PhaseEvent { t, kind: PhaseEventKind::Progress { phase, fraction: self.fraction() } });
        if self.elapsed >= duration - TIME_EPSILON {
            if self.fails[self.phase] {
                self.finished = true;
                out.push(PhaseEvent {
                    t,
                    kind: PhaseEventKind::Finished { success: false, failed_phase: Some(phase) },
                });
            } else if phase == ExecPhase::Place {
                self.finished = true;
                out.push(PhaseEvent {
                    t,
                    kind: PhaseEventKind::Finished { success: true, failed_phase: None },
                });
            } else {
                self.phase += 1;
                self.elapsed = 0.0;
                out.push(PhaseEvent { t, kind: PhaseEventKind::Started { phase: self.phase() } });
            }
        }
        if self.halt_deferred && !self.finished {
            self.halt_deferred = false;
            self.halted = true;
        }
        out
    }
}

/// Runs a plan to completion without pauses, returning every event.
pub fn run_to_end(plan: ExecutionPlan, fails: [bool; 4], start: f64, dt: f64) -> Vec<PhaseEvent> {
    let (mut exec, first) = Execution::start(plan, fails, start);
    let mut events = vec![first];
    let mut t = start;
    while !exec.is_finished() {
        t = snap(t + dt);
        events.extend(exec.step(t, dt));
    }
    events
}
