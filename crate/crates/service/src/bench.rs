//! Batch runs: many scripted sessions per device, aggregated into reports.

use std::path::Path;

use hitl_core::metrics::export::{export, Format};
use hitl_core::metrics::{record, summarize, DeviceColumn, ElectrodeSite, MetricsError, MetricsReport, TrialRecord};
use hitl_core::par::{self, Execution};
use hitl_core::signal::CalibrationConfig;
use hitl_core::sim::{seeded_stream, Scene, SimConfig};
use hitl_core::DeviceSource;
use rand::Rng;
use thiserror::Error;

use crate::script::{run_scripted, scripted_calibration, ScriptedUser, UserProfile};
use crate::session::{SessionConfig, SessionError};

/// Seed stream for per-session seeds.
const SESSION_STREAM: u64 = 32;
pub const MAX_ATTEMPTS: u32 = 3;
/// Simulated seconds a session may run before it is cut off.
pub const SESSION_LIMIT: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchDevice {
    pub device: DeviceSource,
    pub site: ElectrodeSite,
}

impl BenchDevice {
    pub fn parse(s: &str) -> Option<Self> {
        let (device, site) = match s.trim().to_ascii_lowercase().as_str() {
            "mouse" => (DeviceSource::Mouse, ElectrodeSite::NotApplicable),
            "direct" => (DeviceSource::Direct, ElectrodeSite::NotApplicable),
            "voice" | "alexa" => (DeviceSource::Voice, ElectrodeSite::NotApplicable),
            "switch" => (DeviceSource::Switch, ElectrodeSite::NotApplicable),
            "semg" | "semg-forearm" | "semg_forearm" => (DeviceSource::Semg, ElectrodeSite::Forearm),
            "semg-ear" | "semg_ear" => (DeviceSource::Semg, ElectrodeSite::Ear),
            _ => return None,
        };
        Some(Self { device, site })
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>, BenchError> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| Self::parse(p).ok_or_else(|| BenchError::Usage(format!("unknown device {p:?}"))))
            .collect()
    }

    pub fn column(self) -> DeviceColumn {
        DeviceColumn::of(self.device, self.site)
    }
}

/// Extra grasp failure probability for one object under one device column.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureOverride {
    pub column: DeviceColumn,
    pub object: String,
    pub probability: f64,
}

impl FailureOverride {
    /// Parses `device:object:p`, e.g. `switch:ycb:0.3`.
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        let bad = || BenchError::Usage(format!("expected DEVICE:OBJECT:P, got {s:?}"));
        let mut parts = s.split(':');
        let (Some(d), Some(o), Some(p), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let column = BenchDevice::parse(d).ok_or_else(bad)?.column();
        let probability: f64 = p.parse().map_err(|_| bad())?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(bad());
        }
        Ok(Self { column, object: o.to_string(), probability })
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub devices: Vec<BenchDevice>,
    /// Sessions per device; each session attempts every object once.
    pub sessions: u32,
    pub seed: u64,
    pub scene: Scene,
    pub sim: SimConfig,
    pub failures: Vec<FailureOverride>,
    /// Re-run a session with a fresh seed when it faults or is cut off.
    pub retry_on_failure: bool,
    pub mode: Execution,
}

impl BenchConfig {
    pub fn new(devices: Vec<BenchDevice>, sessions: u32, seed: u64) -> Self {
        Self {
            devices,
            sessions,
            seed,
            scene: Scene::default_tabletop(),
            sim: SimConfig::default(),
            failures: Vec::new(),
            retry_on_failure: false,
            mode: Execution::Parallel,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{} session {index}: {source}", device.key())]
    Session { device: DeviceColumn, index: u32, source: SessionError },
    #[error("{} session {index}: calibration failed: {message}", device.key())]
    Calibration { device: DeviceColumn, index: u32, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub column: DeviceColumn,
    pub index: u32,
    pub seed: u64,
    pub attempts: u32,
    pub hash: String,
    pub trials: Vec<TrialRecord>,
    pub incomplete: u32,
    pub faults: u32,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: MetricsReport,
    pub sessions: Vec<SessionSummary>,
}

pub fn session_seed(base: u64, column: DeviceColumn, index: u32, attempt: u32) -> u64 {
    let stream = SESSION_STREAM + DeviceColumn::ALL.iter().position(|c| *c == column).unwrap_or(0) as u64;
    seeded_stream(base, stream, ((attempt as u64) << 32) | index as u64).random()
}

fn run_one(cfg: &BenchConfig, dev: BenchDevice, index: u32) -> Result<SessionSummary, BenchError> {
    let column = dev.column();
    let mut sim = cfg.sim.clone();
    for f in cfg.failures.iter().filter(|f| f.column == column) {
        sim.object_failure.insert(f.object.clone(), f.probability);
    }
    let attempts = if cfg.retry_on_failure { MAX_ATTEMPTS } else { 1 };
    let mut last = None;
    for attempt in 0..attempts {
        let seed = session_seed(cfg.seed, column, index, attempt);
        let mut scfg = SessionConfig::new(dev.device, cfg.scene.clone(), sim.clone().with_seed(seed));
        scfg.site = dev.site;
        scfg.keep_lines = false;
        if dev.device == DeviceSource::Semg {
            scfg.calibration = scripted_calibration(seed, &CalibrationConfig::default()).map_err(|e| {
                BenchError::Calibration { device: column, index, message: e.to_string() }
            })?;
        }
        let trace = run_scripted(&scfg, ScriptedUser::new(dev.device, UserProfile::for_device(dev.device), seed), SESSION_LIMIT)
            .map_err(|source| BenchError::Session { device: column, index, source })?;
        let recorded = record(&trace.timeline, dev.device, dev.site)?;
        let summary = SessionSummary {
            column,
            index,
            seed,
            attempts: attempt + 1,
            hash: trace.hash,
            trials: recorded.trials,
            incomplete: recorded.incomplete,
            faults: trace.faults,
        };
        let clean = summary.incomplete == 0 && summary.faults == 0;
        last = Some(summary);
        if clean {
            break;
        }
    }
    Ok(last.expect("at least one attempt"))
}

/// Runs every (device, session) pair and aggregates the trial records.
/// Output is identical whichever execution mode is used.
pub fn run(cfg: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    if cfg.devices.is_empty() || cfg.sessions == 0 {
        return Err(BenchError::Usage("need at least one device and one session".into()));
    }
    cfg.sim.validate().map_err(|e| BenchError::Usage(e.to_string()))?;
    let jobs: Vec<(BenchDevice, u32)> =
        cfg.devices.iter().flat_map(|&d| (0..cfg.sessions).map(move |i| (d, i))).collect();
    let results = par::map(&jobs, cfg.mode, |&(d, i)| run_one(cfg, d, i));
    let sessions = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let trials: Vec<TrialRecord> = sessions.iter().flat_map(|s| s.trials.iter().cloned()).collect();
    let report = summarize(&trials)?;
    Ok(BenchOutcome { report, sessions })
}

pub fn sessions_csv(sessions: &[SessionSummary]) -> String {
    let mut out = String::from("device,session,seed,attempts,trials,successes,incomplete,faults,hash\n");
    for s in sessions {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.column.key(),
            s.index,
            s.seed,
            s.attempts,
            s.trials.len(),
            s.trials.iter().filter(|t| t.success).count(),
            s.incomplete,
            s.faults,
            s.hash
        ));
    }
    out
}

/// Writes report.txt, report.csv, report.json and sessions.csv into `dir`.
pub fn write_reports(outcome: &BenchOutcome, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for format in [Format::AlignedTable, Format::Csv, Format::Structured] {
        std::fs::write(dir.join(format!("report.{}", format.extension())), export(&outcome.report, format))?;
    }
    std::fs::write(dir.join("sessions.csv"), sessions_csv(&outcome.sessions))
}
