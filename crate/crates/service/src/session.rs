//! One human-in-the-loop session: adapter → pipeline ⇄ simulation.
//!
//! Everything that happens is appended to the trace as it happens, and
//! time only moves in fixed `dt` steps of the simulation clock, whether
//! the session is live or replayed.

use std::collections::VecDeque;

use hitl_core::metrics::{ElectrodeSite, TimelineEvent};
use hitl_core::pipeline::{EngineEvent, EngineRequest, Pipeline, PipelineState};
use hitl_core::signal::{CalibrationConfig, SignalError, TIME_EPSILON};
use hitl_core::sim::{Scene, SimConfig, SimError, Simulation};
use hitl_core::DeviceSource;
use thiserror::Error;

use crate::adapters::{Adapter, DeviceInput, PowerBar};
use crate::trace::{
    Control, RecordBody, SessionSnapshot, TraceError, TraceFile, TraceHeader, TraceRecord, TraceSink,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("input at t={t} precedes session time {now}")]
    TimeRegression { t: f64, now: f64 },
    #[error("session already closed")]
    Closed,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("record at line {line}: {source}")]
    Session { line: usize, source: SessionError },
    #[error("replay diverges from the recorded trace at line {line}")]
    Diverged { line: usize },
    #[error("replay produced {produced} lines, trace has {recorded}")]
    Length { produced: usize, recorded: usize },
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub device: DeviceSource,
    pub site: ElectrodeSite,
    pub scene: Scene,
    pub scene_file: Option<String>,
    pub sim: SimConfig,
    pub calibration: CalibrationConfig,
    /// Keep every trace line in memory (needed to write or compare traces).
    pub keep_lines: bool,
}

impl SessionConfig {
    pub fn new(device: DeviceSource, scene: Scene, sim: SimConfig) -> Self {
        Self {
            device,
            site: if device == DeviceSource::Semg { ElectrodeSite::Forearm } else { ElectrodeSite::NotApplicable },
            scene,
            scene_file: None,
            sim,
            calibration: CalibrationConfig::default(),
            keep_lines: true,
        }
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader::new(
            self.device,
            self.site,
            self.scene.clone(),
            self.scene_file.clone(),
            self.sim.clone(),
            self.calibration,
        )
    }
}

/// A finished session.
#[derive(Debug, Clone)]
pub struct SessionTrace {
    pub header: TraceHeader,
    pub hash: String,
    pub lines: Option<Vec<String>>,
    pub timeline: Vec<TimelineEvent>,
    pub scene: Scene,
    pub trials_done: u32,
    pub faults: u32,
    pub end_t: f64,
}

impl SessionTrace {
    /// Header plus driver records only: enough to replay the session.
    pub fn script_lines(&self) -> Option<Vec<String>> {
        let lines = self.lines.as_ref()?;
        let mut out = vec![lines[0].clone()];
        for l in &lines[1..] {
            let rec: TraceRecord = serde_json::from_str(l).ok()?;
            if rec.body.is_driver() {
                out.push(l.clone());
            }
        }
        Some(out)
    }
}

pub struct Session {
    header: TraceHeader,
    pipeline: Pipeline,
    sim: Simulation,
    adapter: Adapter,
    sink: TraceSink,
    timeline: Vec<TimelineEvent>,
    last_state: PipelineState,
    last_snapshot: Option<SessionSnapshot>,
    shown_power: Option<PowerBar>,
    last_input_t: f64,
    faults: u32,
    outbox: Option<Vec<(f64, SessionSnapshot)>>,
}

impl Session {
    pub fn new(cfg: &SessionConfig) -> Result<Self, SessionError> {
        Self::from_header(cfg.header(), cfg.keep_lines)
    }

    pub fn from_header(header: TraceHeader, keep_lines: bool) -> Result<Self, SessionError> {
        let sim = Simulation::new(header.sim.clone(), header.scene.clone())?;
        let adapter = Adapter::new(header.device, &header.calibration)?;
        let mut sink = TraceSink::new(keep_lines);
        sink.push(&header);
        let pipeline = Pipeline::new();
        let mut s = Self {
            last_state: pipeline.state(),
            header,
            pipeline,
            sim,
            adapter,
            sink,
            timeline: vec![TimelineEvent::entered(0.0, PipelineState::ObjectRecognition)],
            last_snapshot: None,
            shown_power: None,
            last_input_t: 0.0,
            faults: 0,
            outbox: None,
        };
        s.shown_power = s.adapter.display().power;
        s.publish(0.0);
        let start = s.pipeline.start();
        s.dispatch(0.0, start);
        s.publish(0.0);
        Ok(s)
    }

    /// Collect every published snapshot for a live client, starting with
    /// the one currently shown.
    pub fn enable_outbox(&mut self) {
        if self.outbox.is_none() {
            let current = self.last_snapshot.clone().map(|s| (self.sim.clock(), s));
            self.outbox = Some(current.into_iter().collect());
        }
    }

    pub fn take_outbox(&mut self) -> Vec<(f64, SessionSnapshot)> {
        self.outbox.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    pub fn clock(&self) -> f64 {
        self.sim.clock()
    }

    pub fn dt(&self) -> f64 {
        self.sim.dt()
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn trials_done(&self) -> u32 {
        self.pipeline.trials_done()
    }

    pub fn records_written(&self) -> usize {
        self.sink.count()
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        let mut device = self.adapter.display();
        device.power = self.shown_power;
        SessionSnapshot { pipeline: self.pipeline.snapshot(), device }
    }

    fn record(&mut self, t: f64, body: RecordBody) {
        self.sink.push(&TraceRecord { t, body });
    }

    fn publish(&mut self, t: f64) {
        let snap = self.snapshot();
        if self.last_snapshot.as_ref() != Some(&snap) {
            self.record(t, RecordBody::Snapshot { snapshot: Box::new(snap.clone()) });
            if let Some(out) = &mut self.outbox {
                out.push((t, snap.clone()));
            }
            self.last_snapshot = Some(snap);
        }
    }

    fn note_state(&mut self, t: f64) {
        let now = self.pipeline.state();
        if now != self.last_state {
            self.timeline.push(TimelineEvent::entered(t, now));
            self.last_state = now;
        }
    }

    fn fault(&mut self, t: f64, message: String) {
        self.faults += 1;
        self.record(t, RecordBody::Fault { message });
    }

    fn dispatch(&mut self, t: f64, requests: Vec<EngineRequest>) {
        let mut queue: VecDeque<EngineRequest> = requests.into();
        while let Some(req) = queue.pop_front() {
            self.record(t, RecordBody::Request { request: req });
            match self.sim.handle(&req) {
                Ok(events) => {
                    for ev in events {
                        queue.extend(self.engine_event(t, ev));
                    }
                }
                Err(e) => self.fault(t, e.to_string()),
            }
        }
    }

    fn engine_event(&mut self, t: f64, ev: EngineEvent) -> Vec<EngineRequest> {
        self.record(t, RecordBody::Engine { event: ev.clone() });
        let result = self.pipeline.on_engine_event(&ev);
        if let EngineEvent::ExecutionDone { object, success, failed_phase } = ev {
            let label = self.sim.scene().get(object).map(|o| o.label.clone()).unwrap_or_default();
            self.timeline.push(TimelineEvent::trial_ended(t, &label, success));
            self.record(t, RecordBody::Outcome { object, label, success, failed_phase });
        }
        self.note_state(t);
        match result {
            Ok(reqs) => reqs,
            Err(e) => {
                self.fault(t, e.to_string());
                Vec::new()
            }
        }
    }

    /// Advances the simulation by one `dt`.
    pub fn step(&mut self) {
        let events = self.sim.step(self.sim.dt());
        let t = self.sim.clock();
        self.adapter.tick(t);
        for ev in events {
            let reqs = self.engine_event(t, ev);
            self.dispatch(t, reqs);
        }
        self.shown_power = self.adapter.display().power;
        self.publish(t);
    }

    /// Steps until the next step would pass `t`.
    pub fn advance_to(&mut self, t: f64) {
        let dt = self.sim.dt();
        while self.sim.clock() + dt <= t + TIME_EPSILON {
            self.step();
        }
    }

    fn check_time(&self, t: f64) -> Result<(), SessionError> {
        let now = self.last_input_t.max(self.sim.clock());
        if !t.is_finite() || t < now - TIME_EPSILON {
            return Err(SessionError::TimeRegression { t, now });
        }
        Ok(())
    }

    pub fn input(&mut self, t: f64, input: DeviceInput, client_t: Option<f64>) -> Result<(), SessionError> {
        self.check_time(t)?;
        self.advance_to(t);
        self.last_input_t = t;
        let buttons = self.pipeline.buttons().clone();
        let fed = self.adapter.feed(t, &input, &buttons);
        self.record(t, RecordBody::Input { input, client_t });
        match fed {
            Err(rejection) => self.record(t, RecordBody::Rejected { reason: rejection.to_string() }),
            Ok(None) => {}
            Ok(Some(command)) => {
                self.record(t, RecordBody::Command { command: command.clone() });
                let outcome = self.pipeline.apply(&command);
                let requests = outcome.requests.clone();
                self.record(t, RecordBody::Applied { outcome });
                self.note_state(t);
                self.dispatch(t, requests);
            }
        }
        self.publish(t);
        Ok(())
    }

    pub fn control(&mut self, t: f64, control: Control) -> Result<(), SessionError> {
        self.check_time(t)?;
        self.advance_to(t);
        self.last_input_t = t;
        match &control {
            Control::Abandon { object } => self.timeline.push(TimelineEvent::trial_ended(t, object, false)),
        }
        self.record(t, RecordBody::Control { control });
        self.publish(t);
        Ok(())
    }

    /// Steps while the robot or the recognizer is busy, up to `limit`.
    pub fn wait_while_busy(&mut self, limit: f64) {
        while !self.pipeline.state().accepts_input() || self.pipeline.state() == PipelineState::GraspExecution {
            if self.sim.clock() >= limit {
                break;
            }
            self.step();
        }
    }

    pub fn close(mut self, t: f64) -> Result<SessionTrace, SessionError> {
        self.check_time(t)?;
        self.advance_to(t);
        self.record(t, RecordBody::Closed);
        self.timeline.push(TimelineEvent::closed(t));
        let (hash, lines) = self.sink.finish();
        Ok(SessionTrace {
            header: self.header,
            hash,
            lines,
            timeline: self.timeline,
            scene: self.sim.scene().clone(),
            trials_done: self.pipeline.trials_done(),
            faults: self.faults,
            end_t: t,
        })
    }
}

/// Re-runs a trace file. Full traces must be reproduced line for line.
pub fn replay(file: &TraceFile) -> Result<SessionTrace, ReplayError> {
    let full = !file.is_script();
    let mut session = Session::from_header(file.header.clone(), true)
        .map_err(|source| ReplayError::Session { line: 1, source })?;
    let mut close_t = None;
    let mut last_t = 0.0;
    for (i, rec) in file.records.iter().enumerate() {
        let line = i + 2;
        let wrap = |source| ReplayError::Session { line, source };
        last_t = rec.t;
        match &rec.body {
            RecordBody::Input { input, client_t } => {
                session.input(rec.t, input.clone(), *client_t).map_err(wrap)?
            }
            RecordBody::Control { control } => session.control(rec.t, control.clone()).map_err(wrap)?,
            RecordBody::Closed => {
                close_t = Some(rec.t);
                break;
            }
            _ => {}
        }
    }
    let trace = session
        .close(close_t.unwrap_or(last_t))
        .map_err(|source| ReplayError::Session { line: file.lines.len(), source })?;
    if full {
        let produced = trace.lines.as_deref().unwrap_or_default();
        if let Some(i) = produced.iter().zip(&file.lines).position(|(a, b)| a != b) {
            return Err(ReplayError::Diverged { line: i + 1 });
        }
        if produced.len() != file.lines.len() {
            return Err(ReplayError::Length { produced: produced.len(), recorded: file.lines.len() });
        }
    }
    Ok(trace)
}
