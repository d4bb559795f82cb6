//! Scripted users: closed-loop input generators standing in for people.
//!
//! A scripted user watches the session snapshot, decides which button it
//! wants next, and performs one device gesture at a time with a reaction
//! delay. Gestures fail at a configurable rate: a miss does nothing, a slip
//! sends the other command. The loop reads the screen again after every
//! gesture, so slips are corrected the way a person would correct them.

use std::collections::VecDeque;

use hitl_core::pipeline::{ButtonId, PipelineState};
use hitl_core::signal::{calibrate, CalibrationConfig, EmgFrame, SignalError};
use hitl_core::sim::{seeded_stream, Reachability};
use hitl_core::switch::SwitchEventKind;
use hitl_core::{CommandKind, DeviceSource};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::adapters::DeviceInput;
use crate::session::{Session, SessionConfig, SessionError, SessionTrace};
use crate::trace::{Control, SessionSnapshot};

/// RNG stream ids, disjoint from the simulation's.
const USER_STREAM: u64 = 16;
const CALIBRATION_STREAM: u64 = 17;

pub const EMG_RATE: f64 = 250.0;
const CARRIER_HZ: f64 = 50.0;
const NOISE_SIGMA: f64 = 0.01;
/// Burst amplitudes relative to the calibration flex.
const MEDIUM_AMPLITUDE: f64 = 0.6;
const HIGH_AMPLITUDE: f64 = 1.2;
const WEAK_AMPLITUDE: f64 = 0.3;

pub const PICK_ORDER: [&str; 4] = ["block1", "block2", "block3", "ycb"];
pub const MAX_RERUNS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfile {
    /// Fixed part of the delay before each gesture, seconds.
    pub reaction: f64,
    /// Mean of the exponential extra delay, seconds.
    pub hesitation: f64,
    /// Probability a gesture produces nothing.
    pub miss_rate: f64,
    /// Probability a gesture produces the other command.
    pub slip_rate: f64,
}

impl UserProfile {
    pub fn for_device(device: DeviceSource) -> Self {
        let (reaction, hesitation, miss_rate, slip_rate) = match device {
            DeviceSource::Direct => (0.5, 0.0, 0.0, 0.0),
            DeviceSource::Mouse => (1.0, 0.8, 0.0, 0.03),
            DeviceSource::Voice => (2.0, 1.0, 0.08, 0.0),
            DeviceSource::Switch => (1.2, 0.8, 0.05, 0.03),
            DeviceSource::Semg => (1.5, 1.0, 0.08, 0.0),
        };
        Self { reaction, hesitation, miss_rate, slip_rate }
    }

    pub fn flawless(self) -> Self {
        Self { miss_rate: 0.0, slip_rate: 0.0, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    /// Timed device inputs making up one gesture.
    Gesture(Vec<(f64, DeviceInput)>),
    Control(f64, Control),
    /// Nothing to do until the screen changes.
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Execute {
    Clean,
    Miss,
    Slip,
}

pub struct ScriptedUser {
    device: DeviceSource,
    profile: UserProfile,
    rng: ChaCha8Rng,
    targets: VecDeque<String>,
    consumed: u32,
    abandoned: u32,
    reruns: u32,
    last_state: Option<PipelineState>,
    free_at: f64,
}

impl ScriptedUser {
    pub fn new(device: DeviceSource, profile: UserProfile, seed: u64) -> Self {
        Self {
            device,
            profile,
            rng: seeded_stream(seed, USER_STREAM, 0),
            targets: PICK_ORDER.iter().map(|s| s.to_string()).collect(),
            consumed: 0,
            abandoned: 0,
            reruns: 0,
            last_state: None,
            free_at: 0.0,
        }
    }

    /// Replaces the default pick order.
    pub fn with_order<S: AsRef<str>>(mut self, order: &[S]) -> Self {
        self.targets = order.iter().map(|s| s.as_ref().to_string()).collect();
        self
    }

    pub fn device(&self) -> DeviceSource {
        self.device
    }

    pub fn done(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn target(&self) -> Option<&str> {
        self.targets.front().map(String::as_str)
    }

    /// Drops targets whose attempt has ended.
    fn sync(&mut self, trials_done: u32) {
        while self.consumed < trials_done + self.abandoned && !self.targets.is_empty() {
            self.targets.pop_front();
            self.consumed += 1;
            self.reruns = 0;
        }
    }

    fn start_time(&mut self, now: f64) -> f64 {
        let extra = if self.profile.hesitation > 0.0 {
            Exp::new(1.0 / self.profile.hesitation).expect("positive rate").sample(&mut self.rng)
        } else {
            0.0
        };
        let t = now.max(self.free_at) + self.profile.reaction + extra.min(10.0);
        (t * 1000.0).round() / 1000.0
    }

    fn roll(&mut self) -> Execute {
        let u: f64 = self.rng.random();
        if u < self.profile.miss_rate {
            Execute::Miss
        } else if u < self.profile.miss_rate + self.profile.slip_rate {
            Execute::Slip
        } else {
            Execute::Clean
        }
    }

    /// Next move given what is on screen at `now`.
    pub fn next(&mut self, snap: &SessionSnapshot, now: f64, trials_done: u32) -> Plan {
        self.sync(trials_done);
        let Some(target) = self.targets.front().cloned() else { return Plan::Wait };
        let p = &snap.pipeline;
        let entered = self.last_state != Some(p.state);
        self.last_state = Some(p.state);
        let want = match p.state {
            PipelineState::ObjectRecognition | PipelineState::GraspExecution => return Plan::Wait,
            PipelineState::PausedExecution => ButtonId::Continue,
            PipelineState::ObjectSelection => {
                if entered && !p.objects.iter().any(|o| o.label == target) {
                    self.reruns += 1;
                }
                match p.objects.iter().position(|o| o.label == target) {
                    Some(i) if i == p.object_highlight => ButtonId::SelectObject,
                    Some(_) => ButtonId::NextObject,
                    None if self.reruns >= MAX_RERUNS => {
                        self.abandoned += 1;
                        let t = self.start_time(now);
                        self.free_at = t;
                        return Plan::Control(t, Control::Abandon { object: target });
                    }
                    None => ButtonId::RerunVision,
                }
            }
            PipelineState::GraspSelection => {
                let wrong_object = p.grasps.first().is_some_and(|g| {
                    p.objects.iter().find(|o| o.id == g.object).is_none_or(|o| o.label != target)
                });
                let reachable = p.grasps.iter().position(|g| g.reachability == Reachability::Reachable);
                match reachable {
                    _ if wrong_object || p.grasps.is_empty() => ButtonId::Back,
                    Some(i) if i == p.grasp_highlight => ButtonId::SelectGrasp,
                    Some(_) => ButtonId::NextGrasp,
                    None => {
                        self.abandoned += 1;
                        let t = self.start_time(now);
                        self.free_at = t;
                        return Plan::Control(t, Control::Abandon { object: target });
                    }
                }
            }
        };
        let t0 = self.start_time(now);
        let gesture = self.gesture(t0, snap, want);
        self.free_at = gesture.last().map_or(t0, |(t, _)| *t);
        if self.device == DeviceSource::Semg {
            // Rest long enough for the detector to re-arm.
            self.free_at += 0.3;
        }
        Plan::Gesture(gesture)
    }

    fn gesture(&mut self, t0: f64, snap: &SessionSnapshot, want: ButtonId) -> Vec<(f64, DeviceInput)> {
        let p = &snap.pipeline;
        let exec = self.roll();
        if self.device == DeviceSource::Voice {
            let text = match exec {
                Execute::Miss => "Alexa, tell the robot um".to_string(),
                _ => format!("Alexa, tell the robot {}", want.label()),
            };
            return vec![(t0, DeviceInput::Utterance { text })];
        }
        let on_it = p.buttons.get(p.highlight).is_some_and(|b| b.id == want);
        let mut kind = if on_it { CommandKind::Select } else { CommandKind::Cycle };
        if exec == Execute::Slip {
            kind = match kind {
                CommandKind::Select => CommandKind::Cycle,
                CommandKind::Cycle => CommandKind::Select,
            };
        }
        let miss = exec == Execute::Miss;
        match self.device {
            DeviceSource::Mouse | DeviceSource::Direct => {
                if miss {
                    Vec::new()
                } else {
                    vec![(t0, DeviceInput::Click { command: kind })]
                }
            }
            DeviceSource::Switch => {
                let hold = if miss {
                    self.rng.random_range(0.02..0.08)
                } else if kind == CommandKind::Cycle {
                    self.rng.random_range(0.3..0.7)
                } else {
                    self.rng.random_range(1.3..2.2)
                };
                let t1 = ((t0 + hold) * 1000.0).round() / 1000.0;
                vec![
                    (t0, DeviceInput::Switch { kind: SwitchEventKind::Press }),
                    (t1, DeviceInput::Switch { kind: SwitchEventKind::Release }),
                ]
            }
            DeviceSource::Semg => {
                let (amp, len) = if miss {
                    (WEAK_AMPLITUDE, 0.05)
                } else if kind == CommandKind::Cycle {
                    (MEDIUM_AMPLITUDE, 0.5)
                } else {
                    (HIGH_AMPLITUDE, 0.35)
                };
                burst(&mut self.rng, t0, 0.1, amp, len, 0.7)
                    .into_iter()
                    .map(|f| (f.t, DeviceInput::Emg { v: f.v }))
                    .collect()
            }
            DeviceSource::Voice => unreachable!("handled above"),
        }
    }
}

/// Samples at the fixed rate covering `[t0, t0 + lead + len + tail)`, with a
/// sine burst of amplitude `amp` after `lead` seconds of rest noise.
pub fn burst(rng: &mut ChaCha8Rng, t0: f64, lead: f64, amp: f64, len: f64, tail: f64) -> Vec<EmgFrame> {
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let first = (t0 * EMG_RATE).ceil() as i64;
    let last = ((t0 + lead + len + tail) * EMG_RATE).floor() as i64;
    (first..=last)
        .map(|k| {
            let t = k as f64 / EMG_RATE;
            let on = t >= t0 + lead && t < t0 + lead + len;
            let carrier = if on { amp * (std::f64::consts::TAU * CARRIER_HZ * t).sin() } else { 0.0 };
            EmgFrame::new(t, carrier + noise.sample(rng))
        })
        .collect()
}

/// The calibration a scripted sEMG user ends up with: two seconds of rest
/// and two seconds of full flex.
pub fn scripted_calibration(seed: u64, base: &CalibrationConfig) -> Result<CalibrationConfig, SignalError> {
    let mut rng = seeded_stream(seed, CALIBRATION_STREAM, 0);
    let rest = burst(&mut rng, 0.0, 2.0, 0.0, 0.0, 0.0);
    let flex = burst(&mut rng, 10.0, 0.0, 1.0, 2.0, 0.0);
    calibrate(&rest, &flex, base)
}

/// Runs a full session driven by a scripted user.
pub fn run_scripted(cfg: &SessionConfig, mut user: ScriptedUser, limit: f64) -> Result<SessionTrace, SessionError> {
    let mut session = Session::new(cfg)?;
    let mut idle_steps = 0u32;
    loop {
        user.sync(session.trials_done());
        if user.done() || session.clock() >= limit {
            break;
        }
        match user.next(&session.snapshot(), session.clock(), session.trials_done()) {
            Plan::Wait => {
                session.step();
                idle_steps += 1;
            }
            Plan::Gesture(inputs) => {
                idle_steps = 0;
                for (t, input) in inputs {
                    session.input(t, input, None)?;
                }
            }
            Plan::Control(t, control) => session.control(t, control)?,
        }
        if idle_steps > 1_000_000 {
            break;
        }
    }
    let end = session.clock().max(user.free_at);
    session.close(end)
}
