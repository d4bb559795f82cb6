//! Seeded tabletop simulation behind the grasp pipeline.
//!
//! The simulation answers [`EngineRequest`]s from the pipeline and produces
//! [`EngineEvent`]s, either immediately (grasp planning and reachability) or
//! as virtual time advances through [`Simulation::step`] (recognition and
//! execution). All randomness comes from ChaCha streams keyed by the seed
//! plus a per-call counter, so a session is a pure function of its seed and
//! the requests it receives.

pub mod exec;
pub mod grasp;
pub mod reach;
pub mod recognition;
pub mod scene;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{EngineEvent, EngineRequest, GraspEntry};
pub use exec::{ExecPhase, Execution, ExecutionPlan, HaltOutcome, PhaseEvent, PhaseEventKind};
pub use grasp::{GraspCandidate, GraspId, Reachability};
pub use reach::Workspace;
pub use scene::{ObjectId, Pose, Scene, SceneObject, Shape, Zone};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("unknown object {0:?}")]
    UnknownObject(ObjectId),
    #[error("unknown grasp {0:?}")]
    UnknownGrasp(GraspId),
    #[error("grasp {0:?} is not reachable")]
    NotReachable(GraspId),
    #[error("an execution is already running")]
    Busy,
    #[error("no active execution")]
    NoExecution,
    #[error("recognition is already running")]
    RecognitionBusy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub workspace: Workspace,
    /// Widest finger opening, mm.
    pub max_aperture: f64,
    /// Std-dev of detected x/y position, mm.
    pub recognition_sigma: f64,
    /// Std-dev of detected yaw, radians.
    pub recognition_yaw_sigma: f64,
    /// Probability each object is missed by one recognition pass.
    pub recognition_failure: f64,
    /// Seconds a recognition pass takes.
    pub recognition_duration: f64,
    /// Failure probability per execution phase, Approach..Place.
    pub phase_failure: [f64; 4],
    /// Extra failure probability at the Grasp phase, keyed by object label.
    pub object_failure: BTreeMap<String, f64>,
    /// Seconds per execution phase, Approach..Place.
    pub phase_durations: [f64; 4],
    pub standoff: f64,
    pub lift_height: f64,
    pub finger_clearance: f64,
    pub finger_depth: f64,
    pub cylinder_azimuths: usize,
    /// First place-area slot (x, y), mm; further slots step along +x.
    pub place_origin: [f64; 2],
    pub place_spacing: f64,
    /// Fixed simulation step, seconds.
    pub dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workspace: Workspace::default(),
            max_aperture: 120.0,
            recognition_sigma: 2.0,
            recognition_yaw_sigma: 0.01,
            recognition_failure: 0.05,
            recognition_duration: 2.0,
            phase_failure: [0.0; 4],
            object_failure: BTreeMap::new(),
            phase_durations: [16.0, 12.0, 14.0, 18.0],
            standoff: 100.0,
            lift_height: 150.0,
            finger_clearance: 10.0,
            finger_depth: 20.0,
            cylinder_azimuths: 4,
            place_origin: [-255.0, 200.0],
            place_spacing: 170.0,
            dt: 0.05,
        }
    }
}

impl SimConfig {
    /// No perception noise and no failures.
    pub fn ideal() -> Self {
        Self {
            recognition_sigma: 0.0,
            recognition_yaw_sigma: 0.0,
            recognition_failure: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.max_aperture > 0.0) {
            return bad("max_aperture must be positive".into());
        }
        if !prob(self.recognition_failure) {
            return bad("recognition_failure must lie in [0, 1]".into());
        }
        if let Some(p) = self.phase_failure.iter().find(|p| !prob(**p)) {
            return bad(format!("phase failure {p} outside [0, 1]"));
        }
        if let Some((k, p)) = self.object_failure.iter().find(|(_, p)| !prob(**p)) {
            return bad(format!("failure probability {p} for {k} outside [0, 1]"));
        }
        if self.phase_durations.iter().any(|d| !(*d > 0.0)) {
            return bad("phase durations must be positive".into());
        }
        if !(self.dt > 0.0) || !(self.recognition_duration >= 0.0) {
            return bad("dt must be positive and recognition_duration non-negative".into());
        }
        if self.recognition_sigma < 0.0 || self.recognition_yaw_sigma < 0.0 {
            return bad("noise sigmas must be non-negative".into());
        }
        Ok(())
    }

    pub fn place_pose(&self, slot: usize) -> Pose {
        let (col, row) = (slot % 4, slot / 4);
        Pose::new(
            self.place_origin[0] + col as f64 * self.place_spacing,
            self.place_origin[1] + row as f64 * self.place_spacing,
            0.0,
        )
    }
}

/// Independent RNG streams per stochastic consumer.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Recognition = 1,
    Execution = 2,
}

pub fn seeded_stream(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 48) ^ index);
    rng
}

/// Draws the per-phase failure outcomes for one execution.
///
/// Always consumes five uniforms: four phases plus the per-object extra.
pub fn draw_failures<R: Rng + ?Sized>(cfg: &SimConfig, label: &str, rng: &mut R) -> [bool; 4] {
    let mut fails = [false; 4];
    for (i, p) in cfg.phase_failure.iter().enumerate() {
        fails[i] = rng.random::<f64>() < *p;
    }
    let extra = rng.random::<f64>();
    if let Some(p) = cfg.object_failure.get(label) {
        fails[ExecPhase::Grasp.index()] |= extra < *p;
    }
    fails
}

#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    scene: Scene,
    clock: f64,
    perceived: Vec<SceneObject>,
    planned: Vec<GraspCandidate>,
    recognition_left: Option<f64>,
    recognition_calls: u64,
    executions_started: u64,
    execution: Option<Execution>,
}

impl Simulation {
    pub fn new(cfg: SimConfig, scene: Scene) -> Result<Self, SimError> {
        cfg.validate()?;
        scene.validate()?;
        Ok(Self {
            cfg,
            scene,
            clock: 0.0,
            perceived: Vec::new(),
            planned: Vec::new(),
            recognition_left: None,
            recognition_calls: 0,
            executions_started: 0,
            execution: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    pub fn perceived(&self) -> &[SceneObject] {
        &self.perceived
    }

    pub fn planned(&self) -> &[GraspCandidate] {
        &self.planned
    }

    pub fn execution(&self) -> Option<&Execution> {
        self.execution.as_ref()
    }

    /// Nothing in flight: no recognition pass and no running execution.
    pub fn is_idle(&self) -> bool {
        self.recognition_left.is_none()
            && self.execution.as_ref().is_none_or(|e| e.is_halted() || e.is_finished())
    }

    pub fn handle(&mut self, req: &EngineRequest) -> Result<Vec<EngineEvent>, SimError> {
        match *req {
            EngineRequest::Recognize => {
                if self.recognition_left.is_some() {
                    return Err(SimError::RecognitionBusy);
                }
                self.perceived.clear();
                self.planned.clear();
                self.recognition_left = Some(self.cfg.recognition_duration);
                if self.cfg.recognition_duration <= 0.0 {
                    return Ok(vec![self.finish_recognition()]);
                }
                Ok(Vec::new())
            }
            EngineRequest::PlanGrasps { object } => self.plan(object),
            EngineRequest::Execute { grasp } => self.start_execution(grasp),
            EngineRequest::Halt => {
                let dt = self.cfg.dt;
                let exec = self.execution.as_mut().ok_or(SimError::NoExecution)?;
                exec.halt(dt);
                Ok(Vec::new())
            }
            EngineRequest::Resume => {
                let exec = self.execution.as_mut().ok_or(SimError::NoExecution)?;
                exec.resume();
                Ok(Vec::new())
            }
            EngineRequest::Abort => {
                self.execution = None;
                Ok(Vec::new())
            }
        }
    }

    fn finish_recognition(&mut self) -> EngineEvent {
        self.recognition_left = None;
        let mut rng = seeded_stream(self.cfg.seed, Stream::Recognition as u64, self.recognition_calls);
        self.recognition_calls += 1;
        match recognition::recognize(&self.scene, &self.cfg, &mut rng) {
            Ok(objects) => {
                self.perceived = objects.clone();
                EngineEvent::RecognitionDone { objects }
            }
            Err(_) => EngineEvent::RecognitionFailed,
        }
    }

    fn plan(&mut self, object: ObjectId) -> Result<Vec<EngineEvent>, SimError> {
        let obj = self
            .perceived
            .iter()
            .find(|o| o.id == object)
            .ok_or(SimError::UnknownObject(object))?;
        let mut grasps = grasp::plan_grasps(obj, self.cfg.cylinder_azimuths);
        let entries = grasps.iter().map(GraspEntry::from_candidate).collect();
        let mut events = vec![EngineEvent::GraspsPlanned { grasps: entries }];
        for g in &mut grasps {
            g.reachability = reach::check_reachability(g, &self.cfg, &self.perceived);
            events.push(EngineEvent::ReachabilityComputed { grasp: g.id, reachability: g.reachability });
        }
        self.planned = grasps;
        Ok(events)
    }

    fn start_execution(&mut self, id: GraspId) -> Result<Vec<EngineEvent>, SimError> {
        if self.execution.as_ref().is_some_and(|e| !e.is_finished()) {
            return Err(SimError::Busy);
        }
        let g = self.planned.iter().find(|g| g.id == id).ok_or(SimError::UnknownGrasp(id))?;
        if g.reachability != Reachability::Reachable {
            return Err(SimError::NotReachable(id));
        }
        let target = self.scene.get(g.object).ok_or(SimError::UnknownObject(g.object))?;
        let slot = self.scene.in_zone(Zone::PlaceArea).count();
        let plan = ExecutionPlan {
            grasp: id,
            object: g.object,
            durations: self.cfg.phase_durations,
            standoff: self.cfg.standoff,
            lift_height: self.cfg.lift_height,
            place_pose: self.cfg.place_pose(slot),
        };
        let mut rng =
            seeded_stream(self.cfg.seed, Stream::Execution as u64, self.executions_started);
        self.executions_started += 1;
        let fails = draw_failures(&self.cfg, &target.label, &mut rng);
        let (exec, first) = Execution::start(plan, fails, self.clock);
        self.execution = Some(exec);
        Ok(vec![Self::phase_event(first.kind)])
    }

    fn phase_event(kind: PhaseEventKind) -> EngineEvent {
        match kind {
            PhaseEventKind::Started { phase } => EngineEvent::PhaseStarted { phase },
            PhaseEventKind::Progress { phase, fraction } => EngineEvent::Progress { phase, fraction },
            PhaseEventKind::Finished { .. } => unreachable!("handled by step"),
        }
    }

    /// Advances virtual time by `dt` seconds.
    pub fn step(&mut self, dt: f64) -> Vec<EngineEvent> {
        self.clock = exec::snap(self.clock + dt);
        let mut out = Vec::new();
        if let Some(left) = self.recognition_left {
            let left = exec::snap(left - dt);
            if left <= signal_eps() {
                out.push(self.finish_recognition());
            } else {
                self.recognition_left = Some(left);
            }
        }
        let mut finished = None;
        if let Some(exec) = self.execution.as_mut() {
            for ev in exec.step(self.clock, dt) {
                match ev.kind {
                    PhaseEventKind::Finished { success, failed_phase } => {
                        finished = Some((exec.plan.clone(), success, failed_phase));
                    }
                    kind => out.push(Self::phase_event(kind)),
                }
            }
        }
        if let Some((plan, success, failed_phase)) = finished {
            self.execution = None;
            if success {
                if let Some(obj) = self.scene.get_mut(plan.object) {
                    obj.zone = Zone::PlaceArea;
                    obj.pose = plan.place_pose;
                }
            }
            out.push(EngineEvent::ExecutionDone { object: plan.object, success, failed_phase });
        }
        out
    }
}

fn signal_eps() -> f64 {
    crate::signal::TIME_EPSILON
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_until<F: Fn(&EngineEvent) -> bool>(sim: &mut Simulation, stop: F) -> Vec<EngineEvent> {
        let mut all = Vec::new();
        for _ in 0..100_000 {
            let evs = sim.step(sim.dt());
            let hit = evs.iter().any(&stop);
            all.extend(evs);
            if hit {
                return all;
            }
        }
        panic!("condition never reached");
    }

    #[test]
    fn idle_step_only_advances_time() {
        let mut sim = Simulation::new(SimConfig::ideal(), Scene::default_tabletop()).unwrap();
        for _ in 0..10 {
            assert!(sim.step(0.05).is_empty());
        }
        assert!((sim.clock() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn recognize_plan_execute_moves_object() {
        let mut sim = Simulation::new(SimConfig::ideal(), Scene::default_tabletop()).unwrap();
        sim.handle(&EngineRequest::Recognize).unwrap();
        let evs = run_until(&mut sim, |e| matches!(e, EngineEvent::RecognitionDone { .. }));
        let EngineEvent::RecognitionDone { objects } = evs.last().unwrap() else { panic!() };
        assert_eq!(objects.len(), 4);
        let evs = sim.handle(&EngineRequest::PlanGrasps { object: ObjectId(1) }).unwrap();
        assert!(evs.iter().any(|e| matches!(
            e,
            EngineEvent::ReachabilityComputed { reachability: Reachability::Reachable, .. }
        )));
        sim.handle(&EngineRequest::Execute { grasp: GraspId(0) }).unwrap();
        let start = sim.clock();
        let evs = run_until(&mut sim, |e| matches!(e, EngineEvent::ExecutionDone { .. }));
        assert!(matches!(evs.last().unwrap(), EngineEvent::ExecutionDone { success: true, .. }));
        assert!((sim.clock() - start - 60.0).abs() < 1e-6);
        let obj = sim.scene().get(ObjectId(1)).unwrap();
        assert_eq!(obj.zone, Zone::PlaceArea);
        assert_eq!(obj.pose, SimConfig::default().place_pose(0));
    }

    #[test]
    fn certain_grasp_failure_leaves_object() {
        let cfg = SimConfig { phase_failure: [0.0, 1.0, 0.0, 0.0], ..SimConfig::ideal() };
        let mut sim = Simulation::new(cfg, Scene::default_tabletop()).unwrap();
        sim.handle(&EngineRequest::Recognize).unwrap();
        run_until(&mut sim, |e| matches!(e, EngineEvent::RecognitionDone { .. }));
        sim.handle(&EngineRequest::PlanGrasps { object: ObjectId(2) }).unwrap();
        sim.handle(&EngineRequest::Execute { grasp: GraspId(1) }).unwrap();
        let evs = run_until(&mut sim, |e| matches!(e, EngineEvent::ExecutionDone { .. }));
        assert_eq!(
            evs.last().unwrap(),
            &EngineEvent::ExecutionDone {
                object: ObjectId(2),
                success: false,
                failed_phase: Some(ExecPhase::Grasp)
            }
        );
        assert_eq!(sim.scene().get(ObjectId(2)).unwrap().zone, Zone::PickArea);
    }

    #[test]
    fn execute_requires_reachable_grasp() {
        let cfg = SimConfig { max_aperture: 10.0, ..SimConfig::ideal() };
        let mut sim = Simulation::new(cfg, Scene::default_tabletop()).unwrap();
        sim.handle(&EngineRequest::Recognize).unwrap();
        run_until(&mut sim, |e| matches!(e, EngineEvent::RecognitionDone { .. }));
        sim.handle(&EngineRequest::PlanGrasps { object: ObjectId(1) }).unwrap();
        assert_eq!(
            sim.handle(&EngineRequest::Execute { grasp: GraspId(0) }),
            Err(SimError::NotReachable(GraspId(0)))
        );
    }

    #[test]
    fn identical_seeds_identical_logs() {
        let run = || {
            let cfg = SimConfig { phase_failure: [0.2; 4], ..SimConfig::default() }.with_seed(9);
            let mut sim = Simulation::new(cfg, Scene::default_tabletop()).unwrap();
            let mut log = Vec::new();
            for round in 0..3 {
                sim.handle(&EngineRequest::Recognize).unwrap();
                let evs = run_until(&mut sim, |e| {
                    matches!(e, EngineEvent::RecognitionDone { .. } | EngineEvent::RecognitionFailed)
                });
                log.extend(evs);
                let Some(obj) = sim.perceived().first().map(|o| o.id) else { continue };
                log.extend(sim.handle(&EngineRequest::PlanGrasps { object: obj }).unwrap());
                let Some(g) = sim.planned().iter().find(|g| g.reachability == Reachability::Reachable)
                else {
                    continue;
                };
                log.extend(sim.handle(&EngineRequest::Execute { grasp: g.id }).unwrap());
                log.extend(run_until(&mut sim, |e| matches!(e, EngineEvent::ExecutionDone { .. })));
                let _ = round;
            }
            serde_json::to_string(&log).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn failure_draws_respect_object_override() {
        let mut cfg = SimConfig::ideal();
        cfg.object_failure.insert("ycb".into(), 1.0);
        let mut rng = seeded_stream(1, 2, 0);
        assert_eq!(draw_failures(&cfg, "ycb", &mut rng), [false, true, false, false]);
        assert_eq!(draw_failures(&cfg, "block1", &mut rng), [false; 4]);
    }
}
