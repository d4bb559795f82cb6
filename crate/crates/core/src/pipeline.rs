//! The five-stage grasp planner.
//!
//! ```text
//!            RecognitionDone            Select Object
//!   ObjectRecognition ───► ObjectSelection ───► GraspSelection
//!        ▲   ▲   ▲ Rerun Vision │   ▲    Back        │ Select Grasp
//!        │   │   └──────────────┘   └────────────────┤ (reachable only)
//!        │   │ ExecutionDone                         ▼
//!        │   └─────────────────────────────── GraspExecution
//!        │ Restart                          Pause │  ▲ Continue
//!        └─────────────────────────────── PausedExecution
//! ```
//!
//! Every stage shows an ordered button row with one highlighted button.
//! `Cycle` moves the highlight, `Select` activates it. Object Recognition
//! shows no buttons and discards all input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::{CommandKind, MenuCommand};
use crate::sim::{ExecPhase, GraspCandidate, GraspId, ObjectId, Reachability, SceneObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineState {
    ObjectRecognition,
    ObjectSelection,
    GraspSelection,
    GraspExecution,
    PausedExecution,
}

impl PipelineState {
    pub const ALL: [PipelineState; 5] = [
        PipelineState::ObjectRecognition,
        PipelineState::ObjectSelection,
        PipelineState::GraspSelection,
        PipelineState::GraspExecution,
        PipelineState::PausedExecution,
    ];

    /// Position in the four-box pipeline diagram. Paused shares the
    /// execution box.
    pub fn stage_index(self) -> usize {
        match self {
            PipelineState::ObjectRecognition => 0,
            PipelineState::ObjectSelection => 1,
            PipelineState::GraspSelection => 2,
            PipelineState::GraspExecution | PipelineState::PausedExecution => 3,
        }
    }

    pub fn accepts_input(self) -> bool {
        self != PipelineState::ObjectRecognition
    }

    pub fn label(self) -> &'static str {
        match self {
            PipelineState::ObjectRecognition => "Object Recognition",
            PipelineState::ObjectSelection => "Object Selection",
            PipelineState::GraspSelection => "Grasp Selection",
            PipelineState::GraspExecution => "Grasp Execution",
            PipelineState::PausedExecution => "Paused Execution",
        }
    }

    /// Whether a direct transition `self -> to` is part of the graph.
    pub fn can_transition(self, to: PipelineState) -> bool {
        use PipelineState::*;
        matches!(
            (self, to),
            (ObjectRecognition, ObjectSelection)
                | (ObjectSelection, GraspSelection)
                | (ObjectSelection, ObjectRecognition)
                | (GraspSelection, GraspExecution)
                | (GraspSelection, ObjectSelection)
                | (GraspExecution, PausedExecution)
                | (GraspExecution, ObjectRecognition)
                | (PausedExecution, GraspExecution)
                | (PausedExecution, ObjectRecognition)
        )
    }
}

impl std::fmt::Display for PipelineState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ButtonId {
    SelectObject,
    NextObject,
    RerunVision,
    SelectGrasp,
    NextGrasp,
    Back,
    Pause,
    Restart,
    Continue,
}

impl ButtonId {
    pub fn label(self) -> &'static str {
        match self {
            ButtonId::SelectObject => "Select Object",
            ButtonId::NextObject => "Next Object",
            ButtonId::RerunVision => "Rerun Vision",
            ButtonId::SelectGrasp => "Select Grasp",
            ButtonId::NextGrasp => "Next Grasp",
            ButtonId::Back => "Back",
            ButtonId::Pause => "Pause",
            ButtonId::Restart => "Restart",
            ButtonId::Continue => "Continue",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Button {
    pub id: ButtonId,
    pub label: String,
}

/// Ordered buttons of one stage plus the green highlight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ButtonSet {
    pub buttons: Vec<Button>,
    pub highlight: usize,
}

impl ButtonSet {
    pub fn new(ids: &[ButtonId], highlight: usize) -> Self {
        let buttons: Vec<Button> =
            ids.iter().map(|id| Button { id: *id, label: id.label().to_string() }).collect();
        let highlight = if buttons.is_empty() { 0 } else { highlight % buttons.len() };
        Self { buttons, highlight }
    }

    pub fn for_state(state: PipelineState, highlight: usize) -> Self {
        Self::new(buttons_for(state), highlight)
    }

    pub fn ids(&self) -> impl Iterator<Item = ButtonId> + '_ {
        self.buttons.iter().map(|b| b.id)
    }

    pub fn len(&self) -> usize {
        self.buttons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buttons.is_empty()
    }

    pub fn contains(&self, id: ButtonId) -> bool {
        self.ids().any(|b| b == id)
    }

    pub fn highlighted(&self) -> Option<ButtonId> {
        self.buttons.get(self.highlight).map(|b| b.id)
    }

    /// Advances the highlight, wrapping at the end.
    pub fn cycle(&mut self) {
        if !self.buttons.is_empty() {
            self.highlight = (self.highlight + 1) % self.buttons.len();
        }
    }
}

pub fn buttons_for(state: PipelineState) -> &'static [ButtonId] {
    match state {
        PipelineState::ObjectRecognition => &[],
        PipelineState::ObjectSelection => {
            &[ButtonId::SelectObject, ButtonId::NextObject, ButtonId::RerunVision]
        }
        PipelineState::GraspSelection => &[ButtonId::SelectGrasp, ButtonId::NextGrasp, ButtonId::Back],
        PipelineState::GraspExecution => &[ButtonId::Pause],
        PipelineState::PausedExecution => &[ButtonId::Restart, ButtonId::Continue],
    }
}

/// A planned grasp as the pipeline and the UI see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspEntry {
    pub id: GraspId,
    pub object: ObjectId,
    pub label: String,
    pub aperture: f64,
    /// Direction of the finger axis in the table plane, radians.
    pub azimuth: f64,
    pub reachability: Reachability,
}

impl GraspEntry {
    pub fn from_candidate(g: &GraspCandidate) -> Self {
        let axis = g.contacts[1] - g.contacts[0];
        Self {
            id: g.id,
            object: g.object,
            label: g.label.clone(),
            aperture: g.aperture,
            azimuth: axis.y.atan2(axis.x).rem_euclid(std::f64::consts::PI),
            reachability: g.reachability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionProgress {
    pub phase: ExecPhase,
    pub fraction: f64,
}

impl ExecutionProgress {
    pub fn start() -> Self {
        Self { phase: ExecPhase::Approach, fraction: 0.0 }
    }
}

/// Detected objects, planned grasps and execution progress of a session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionContext {
    pub objects: Vec<SceneObject>,
    pub object_highlight: usize,
    pub grasps: Vec<GraspEntry>,
    pub grasp_highlight: usize,
    pub target: Option<ObjectId>,
    pub progress: Option<ExecutionProgress>,
}

impl SessionContext {
    pub fn highlighted_object(&self) -> Option<&SceneObject> {
        self.objects.get(self.object_highlight)
    }

    pub fn highlighted_grasp(&self) -> Option<&GraspEntry> {
        self.grasps.get(self.grasp_highlight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "request", rename_all = "snake_case")]
pub enum EngineRequest {
    Recognize,
    PlanGrasps { object: ObjectId },
    Execute { grasp: GraspId },
    Halt,
    Resume,
    Abort,
}

impl EngineRequest {
    /// Requests that set the arm in motion.
    pub fn is_arm_motion(&self) -> bool {
        matches!(self, EngineRequest::Execute { .. } | EngineRequest::Resume)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EngineEvent {
    RecognitionDone { objects: Vec<SceneObject> },
    RecognitionFailed,
    GraspsPlanned { grasps: Vec<GraspEntry> },
    ReachabilityComputed { grasp: GraspId, reachability: Reachability },
    PhaseStarted { phase: ExecPhase },
    Progress { phase: ExecPhase, fraction: f64 },
    ExecutionDone { object: ObjectId, success: bool, failed_phase: Option<ExecPhase> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("engine event {event} is impossible in state {state}")]
    ProtocolViolation { state: PipelineState, event: &'static str },
}

/// Why a command changed nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgnoreReason {
    InputLocked,
    TimeRegression,
    NotOnScreen,
    NoObjects,
    NoGrasps,
    GraspPending,
    GraspUnreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyOutcome {
    pub from: PipelineState,
    pub to: PipelineState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub button: Option<ButtonId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requests: Vec<EngineRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ignored: Option<IgnoreReason>,
}

impl ApplyOutcome {
    pub fn transitioned(&self) -> bool {
        self.from != self.to
    }
}

/// Everything a display needs to draw the current screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: PipelineState,
    pub stage_index: usize,
    /// Recognition-in-progress overlay; input is locked while shown.
    pub overlay: bool,
    pub buttons: Vec<Button>,
    pub highlight: usize,
    pub objects: Vec<SceneObject>,
    pub object_highlight: usize,
    pub grasps: Vec<GraspEntry>,
    pub grasp_highlight: usize,
    pub progress: Option<ExecutionProgress>,
    pub trials_done: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    state: PipelineState,
    buttons: ButtonSet,
    ctx: SessionContext,
    last_t: f64,
    trials_done: u32,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self::new()
    }
}

impl Pipeline {
    pub fn new() -> Self {
        Self {
            state: PipelineState::ObjectRecognition,
            buttons: ButtonSet::for_state(PipelineState::ObjectRecognition, 0),
            ctx: SessionContext::default(),
            last_t: f64::NEG_INFINITY,
            trials_done: 0,
        }
    }

    /// Requests that open a session: the first recognition pass.
    pub fn start(&self) -> Vec<EngineRequest> {
        vec![EngineRequest::Recognize]
    }

    pub fn state(&self) -> PipelineState {
        self.state
    }

    pub fn buttons(&self) -> &ButtonSet {
        &self.buttons
    }

    pub fn context(&self) -> &SessionContext {
        &self.ctx
    }

    pub fn trials_done(&self) -> u32 {
        self.trials_done
    }

    fn enter(&mut self, state: PipelineState) {
        self.state = state;
        self.buttons = ButtonSet::for_state(state, 0);
        match state {
            PipelineState::ObjectRecognition => {
                self.ctx.objects.clear();
                self.ctx.grasps.clear();
                self.ctx.object_highlight = 0;
                self.ctx.grasp_highlight = 0;
                self.ctx.target = None;
                self.ctx.progress = None;
            }
            PipelineState::ObjectSelection => {
                self.ctx.object_highlight = 0;
                self.ctx.grasps.clear();
                self.ctx.grasp_highlight = 0;
                self.ctx.target = None;
            }
            PipelineState::GraspSelection => {
                self.ctx.grasps.clear();
                self.ctx.grasp_highlight = 0;
            }
            PipelineState::GraspExecution | PipelineState::PausedExecution => {}
        }
    }

    pub fn apply(&mut self, cmd: &MenuCommand) -> ApplyOutcome {
        let from = self.state;
        let mut out = ApplyOutcome { from, to: from, button: None, requests: Vec::new(), ignored: None };
        if cmd.t < self.last_t {
            out.ignored = Some(IgnoreReason::TimeRegression);
            return out;
        }
        self.last_t = cmd.t;
        if !self.state.accepts_input() {
            out.ignored = Some(IgnoreReason::InputLocked);
            return out;
        }
        let button = match (cmd.kind, cmd.target) {
            (CommandKind::Cycle, _) => {
                self.buttons.cycle();
                return out;
            }
            (CommandKind::Select, Some(id)) if self.buttons.contains(id) => id,
            (CommandKind::Select, Some(_)) => {
                out.ignored = Some(IgnoreReason::NotOnScreen);
                return out;
            }
            (CommandKind::Select, None) => match self.buttons.highlighted() {
                Some(id) => id,
                None => {
                    out.ignored = Some(IgnoreReason::InputLocked);
                    return out;
                }
            },
        };
        out.button = Some(button);
        match self.activate(button) {
            Ok(requests) => out.requests = requests,
            Err(reason) => out.ignored = Some(reason),
        }
        out.to = self.state;
        out
    }

    fn activate(&mut self, button: ButtonId) -> Result<Vec<EngineRequest>, IgnoreReason> {
        use PipelineState as S;
        let requests = match button {
            ButtonId::SelectObject => {
                let object = self.ctx.highlighted_object().ok_or(IgnoreReason::NoObjects)?.id;
                self.enter(S::GraspSelection);
                self.ctx.target = Some(object);
                vec![EngineRequest::PlanGrasps { object }]
            }
            ButtonId::NextObject => {
                if self.ctx.objects.is_empty() {
                    return Err(IgnoreReason::NoObjects);
                }
                self.ctx.object_highlight = (self.ctx.object_highlight + 1) % self.ctx.objects.len();
                Vec::new()
            }
            ButtonId::RerunVision => {
                self.enter(S::ObjectRecognition);
                vec![EngineRequest::Recognize]
            }
            ButtonId::SelectGrasp => {
                let grasp = self.ctx.highlighted_grasp().ok_or(IgnoreReason::NoGrasps)?;
                match grasp.reachability {
                    Reachability::Reachable => {}
                    Reachability::Pending => return Err(IgnoreReason::GraspPending),
                    Reachability::Unreachable => return Err(IgnoreReason::GraspUnreachable),
                }
                let grasp = grasp.id;
                self.enter(S::GraspExecution);
                self.ctx.progress = Some(ExecutionProgress::start());
                vec![EngineRequest::Execute { grasp }]
            }
            ButtonId::NextGrasp => {
                if self.ctx.grasps.is_empty() {
                    return Err(IgnoreReason::NoGrasps);
                }
                self.ctx.grasp_highlight = (self.ctx.grasp_highlight + 1) % self.ctx.grasps.len();
                Vec::new()
            }
            ButtonId::Back => {
                self.enter(S::ObjectSelection);
                Vec::new()
            }
            ButtonId::Pause => {
                self.enter(S::PausedExecution);
                vec![EngineRequest::Halt]
            }
            ButtonId::Restart => {
                self.enter(S::ObjectRecognition);
                vec![EngineRequest::Abort, EngineRequest::Recognize]
            }
            ButtonId::Continue => {
                self.enter(S::GraspExecution);
                vec![EngineRequest::Resume]
            }
        };
        Ok(requests)
    }

    pub fn on_engine_event(&mut self, ev: &EngineEvent) -> Result<Vec<EngineRequest>, PipelineError> {
        use PipelineState as S;
        let violation = |state, event| Err(PipelineError::ProtocolViolation { state, event });
        match (ev, self.state) {
            (EngineEvent::RecognitionDone { objects }, S::ObjectRecognition) => {
                self.enter(S::ObjectSelection);
                self.ctx.objects = objects.clone();
            }
            // Nothing found: show an empty scene so the user can rerun vision.
            (EngineEvent::RecognitionFailed, S::ObjectRecognition) => {
                self.enter(S::ObjectSelection);
            }
            (EngineEvent::GraspsPlanned { grasps }, S::GraspSelection) => {
                self.ctx.grasps = grasps.clone();
                self.ctx.grasp_highlight = 0;
            }
            (EngineEvent::ReachabilityComputed { grasp, reachability }, S::GraspSelection) => {
                match self.ctx.grasps.iter_mut().find(|g| g.id == *grasp) {
                    Some(g) => g.reachability = *reachability,
                    None => return violation(self.state, "reachability_computed"),
                }
            }
            (
                EngineEvent::PhaseStarted { phase },
                S::GraspExecution | S::PausedExecution,
            ) => {
                self.ctx.progress = Some(ExecutionProgress { phase: *phase, fraction: 0.0 });
            }
            (
                EngineEvent::Progress { phase, fraction },
                S::GraspExecution | S::PausedExecution,
            ) => {
                self.ctx.progress = Some(ExecutionProgress { phase: *phase, fraction: *fraction });
            }
            // Paused is allowed: a halt on the final release step is deferred.
            (EngineEvent::ExecutionDone { .. }, S::GraspExecution | S::PausedExecution) => {
                self.trials_done += 1;
                self.enter(S::ObjectRecognition);
                return Ok(vec![EngineRequest::Recognize]);
            }
            (ev, state) => return violation(state, event_name(ev)),
        }
        Ok(Vec::new())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            state: self.state,
            stage_index: self.state.stage_index(),
            overlay: !self.state.accepts_input(),
            buttons: self.buttons.buttons.clone(),
            highlight: self.buttons.highlight,
            objects: self.ctx.objects.clone(),
            object_highlight: self.ctx.object_highlight,
            grasps: self.ctx.grasps.clone(),
            grasp_highlight: self.ctx.grasp_highlight,
            progress: self.ctx.progress,
            trials_done: self.trials_done,
        }
    }
}

pub fn event_name(ev: &EngineEvent) -> &'static str {
    match ev {
        EngineEvent::RecognitionDone { .. } => "recognition_done",
        EngineEvent::RecognitionFailed => "recognition_failed",
        EngineEvent::GraspsPlanned { .. } => "grasps_planned",
        EngineEvent::ReachabilityComputed { .. } => "reachability_computed",
        EngineEvent::PhaseStarted { .. } => "phase_started",
        EngineEvent::Progress { .. } => "progress",
        EngineEvent::ExecutionDone { .. } => "execution_done",
    }
}
