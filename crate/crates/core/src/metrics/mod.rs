//! Per-trial timing and outcome records, and the device-by-object summary.
//!
//! A session timeline is the ordered list of pipeline state entries plus
//! trial terminations. Time spent in Object Selection, Grasp Selection and
//! Paused Execution is billed to the user, time in Grasp Execution to the
//! robot, and Object Recognition to nobody.
//!
//! All sums are kept in integer microseconds so a summary does not depend
//! on the order its records arrive in.

pub mod export;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::command::DeviceSource;
use crate::pipeline::PipelineState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Block1,
    Block2,
    Block3,
    Ycb,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 4] =
        [ObjectClass::Block1, ObjectClass::Block2, ObjectClass::Block3, ObjectClass::Ycb];

    pub fn label(self) -> &'static str {
        match self {
            ObjectClass::Block1 => "block1",
            ObjectClass::Block2 => "block2",
            ObjectClass::Block3 => "block3",
            ObjectClass::Ycb => "ycb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.label() == s.trim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeSite {
    Forearm,
    Ear,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl ElectrodeSite {
    pub fn label(self) -> &'static str {
        match self {
            ElectrodeSite::Forearm => "forearm",
            ElectrodeSite::Ear => "ear",
            ElectrodeSite::NotApplicable => "n/a",
        }
    }
}

/// Report columns, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceColumn {
    Mouse,
    Alexa,
    Switch,
    SemgForearm,
    SemgEar,
}

impl DeviceColumn {
    pub const ALL: [DeviceColumn; 5] = [
        DeviceColumn::Mouse,
        DeviceColumn::Alexa,
        DeviceColumn::Switch,
        DeviceColumn::SemgForearm,
        DeviceColumn::SemgEar,
    ];

    /// Direct clicks are tallied with the mouse; sEMG splits by site,
    /// defaulting to the forearm.
    pub fn of(device: DeviceSource, site: ElectrodeSite) -> Self {
        match device {
            DeviceSource::Mouse | DeviceSource::Direct => DeviceColumn::Mouse,
            DeviceSource::Voice => DeviceColumn::Alexa,
            DeviceSource::Switch => DeviceColumn::Switch,
            DeviceSource::Semg if site == ElectrodeSite::Ear => DeviceColumn::SemgEar,
            DeviceSource::Semg => DeviceColumn::SemgForearm,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            DeviceColumn::Mouse => "mouse",
            DeviceColumn::Alexa => "alexa",
            DeviceColumn::Switch => "switch",
            DeviceColumn::SemgForearm => "semg_forearm",
            DeviceColumn::SemgEar => "semg_ear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.key() == s.trim())
    }

    pub fn heading(self) -> &'static str {
        match self {
            DeviceColumn::Mouse => "Mouse",
            DeviceColumn::Alexa => "Alexa",
            DeviceColumn::Switch => "Switch",
            DeviceColumn::SemgForearm => "sEMG (forearm)",
            DeviceColumn::SemgEar => "sEMG (behind ear)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub device: DeviceSource,
    pub site: ElectrodeSite,
    pub object: ObjectClass,
    /// Seconds in input-accepting states before the robot finished.
    pub user_time: f64,
    /// Seconds in Grasp Execution.
    pub robot_time: f64,
    pub success: bool,
}

impl TrialRecord {
    pub fn column(&self) -> DeviceColumn {
        DeviceColumn::of(self.device, self.site)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimelineKind {
    StateEntered { state: PipelineState },
    /// A pick-and-place attempt reached its outcome. Abandoned attempts
    /// (recognition given up on) end here too, with `success: false`.
    TrialEnded { object: String, success: bool },
    SessionClosed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: TimelineKind,
}

impl TimelineEvent {
    pub fn entered(t: f64, state: PipelineState) -> Self {
        Self { t, kind: TimelineKind::StateEntered { state } }
    }

    pub fn trial_ended(t: f64, object: &str, success: bool) -> Self {
        Self { t, kind: TimelineKind::TrialEnded { object: object.to_string(), success } }
    }

    pub fn closed(t: f64) -> Self {
        Self { t, kind: TimelineKind::SessionClosed }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("timeline time regresses at event {index}")]
    TimeRegression { index: usize },
    #[error("unknown object label {0:?}")]
    UnknownObject(String),
    #[error("no trial records")]
    Empty,
    #[error("malformed report: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Recorded {
    pub trials: Vec<TrialRecord>,
    /// Attempts cut off by the end of the session.
    pub incomplete: u32,
}

pub fn to_micros(seconds: f64) -> u64 {
    (seconds.max(0.0) * 1e6).round() as u64
}

pub fn from_micros(us: u64) -> f64 {
    us as f64 / 1e6
}

fn is_user_state(s: PipelineState) -> bool {
    matches!(
        s,
        PipelineState::ObjectSelection | PipelineState::GraspSelection | PipelineState::PausedExecution
    )
}

/// Splits one session timeline into trial records.
///
/// An attempt still open when the timeline ends counts as incomplete if
/// the user had started interacting with it, or if no attempt finished at
/// all in the session.
pub fn record(
    events: &[TimelineEvent],
    device: DeviceSource,
    site: ElectrodeSite,
) -> Result<Recorded, MetricsError> {
    let mut out = Recorded::default();
    let mut state: Option<(PipelineState, f64)> = None;
    let (mut user_us, mut robot_us) = (0u64, 0u64);
    let mut touched = false;
    let mut last_t = f64::NEG_INFINITY;
    let mut closed = false;

    let bill = |state: Option<(PipelineState, f64)>, until: f64, user: &mut u64, robot: &mut u64| {
        if let Some((s, since)) = state {
            let us = to_micros(until).saturating_sub(to_micros(since));
            if is_user_state(s) {
                *user += us;
            } else if s == PipelineState::GraspExecution {
                *robot += us;
            }
        }
    };

    for (index, ev) in events.iter().enumerate() {
        if ev.t < last_t {
            return Err(MetricsError::TimeRegression { index });
        }
        last_t = ev.t;
        if closed {
            break;
        }
        match &ev.kind {
            TimelineKind::StateEntered { state: next } => {
                bill(state, ev.t, &mut user_us, &mut robot_us);
                touched |= next.accepts_input();
                state = Some((*next, ev.t));
            }
            TimelineKind::TrialEnded { object, success } => {
                bill(state, ev.t, &mut user_us, &mut robot_us);
                let object =
                    ObjectClass::parse(object).ok_or_else(|| MetricsError::UnknownObject(object.clone()))?;
                out.trials.push(TrialRecord {
                    device,
                    site,
                    object,
                    user_time: from_micros(user_us),
                    robot_time: from_micros(robot_us),
                    success: *success,
                });
                user_us = 0;
                robot_us = 0;
                touched = false;
                state = state.map(|(s, _)| (s, ev.t));
            }
            TimelineKind::SessionClosed => closed = true,
        }
    }
    let open = touched || out.trials.is_empty();
    if open && !events.is_empty() {
        out.incomplete += 1;
    }
    Ok(out)
}

/// Integer tallies behind one (device, object) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub trials: u32,
    pub successes: u32,
    pub user_time_us: u64,
    pub robot_time_us: u64,
}

impl Cell {
    pub fn add(&mut self, r: &TrialRecord) {
        self.trials += 1;
        self.successes += u32::from(r.success);
        self.user_time_us += to_micros(r.user_time);
        self.robot_time_us += to_micros(r.robot_time);
    }

    pub fn merge(&mut self, other: &Cell) {
        self.trials += other.trials;
        self.successes += other.successes;
        self.user_time_us += other.user_time_us;
        self.robot_time_us += other.robot_time_us;
    }

    /// `None` for an empty cell, never 0%.
    pub fn success_pct(&self) -> Option<f64> {
        (self.trials > 0).then(|| 100.0 * f64::from(self.successes) / f64::from(self.trials))
    }

    pub fn mean_user_time(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.user_time_us as f64 / 1e6 / f64::from(self.trials))
    }

    pub fn mean_robot_time(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.robot_time_us as f64 / 1e6 / f64::from(self.trials))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0u32), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / f64::from(n))
}

/// Mean of row averages; the rule behind the table's overall figure.
pub fn overall_from_rows(row_averages: &[f64]) -> Option<f64> {
    mean(row_averages.iter().copied())
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Keyed by (column, row); see [`export`] for serialized forms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub cells: BTreeMap<(DeviceColumn, ObjectClass), Cell>,
}

impl MetricsReport {
    pub fn cell(&self, device: DeviceColumn, object: ObjectClass) -> Option<&Cell> {
        self.cells.get(&(device, object)).filter(|c| c.trials > 0)
    }

    pub fn success_pct(&self, device: DeviceColumn, object: ObjectClass) -> Option<f64> {
        self.cell(device, object).and_then(Cell::success_pct)
    }

    /// Columns with at least one trial, in table order.
    pub fn devices(&self) -> Vec<DeviceColumn> {
        DeviceColumn::ALL.into_iter().filter(|d| self.has_device(*d)).collect()
    }

    pub fn has_device(&self, device: DeviceColumn) -> bool {
        ObjectClass::ALL.iter().any(|o| self.cell(device, *o).is_some())
    }

    pub fn objects(&self) -> Vec<ObjectClass> {
        ObjectClass::ALL
            .into_iter()
            .filter(|o| DeviceColumn::ALL.iter().any(|d| self.cell(*d, *o).is_some()))
            .collect()
    }

    /// Unweighted mean over the object rows of one device column.
    pub fn device_average(&self, device: DeviceColumn) -> Option<f64> {
        mean(ObjectClass::ALL.iter().filter_map(|o| self.success_pct(device, *o)))
    }

    /// Unweighted mean over the device columns of one object row.
    pub fn object_average(&self, object: ObjectClass) -> Option<f64> {
        mean(DeviceColumn::ALL.iter().filter_map(|d| self.success_pct(*d, object)))
    }

    /// Trial-weighted success rate of one object row.
    pub fn object_weighted(&self, object: ObjectClass) -> Option<f64> {
        let mut total = Cell::default();
        for d in DeviceColumn::ALL {
            if let Some(c) = self.cell(d, object) {
                total.merge(c);
            }
        }
        total.success_pct()
    }

    /// Mean of the object-row averages.
    pub fn overall(&self) -> Option<f64> {
        let rows: Vec<f64> = ObjectClass::ALL.iter().filter_map(|o| self.object_average(*o)).collect();
        overall_from_rows(&rows)
    }

    pub fn total_trials(&self) -> u32 {
        self.cells.values().map(|c| c.trials).sum()
    }
}

pub fn summarize(records: &[TrialRecord]) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut report = MetricsReport::default();
    for r in records {
        report.cells.entry((r.column(), r.object)).or_default().add(r);
    }
    Ok(report)
}
