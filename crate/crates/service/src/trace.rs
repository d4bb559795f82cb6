//! Session trace files.
//!
//! A trace is line-delimited JSON: one header line, then one record per
//! line in time order. A trace may carry only the inputs (a script for
//! replay) or the full record stream a session produced; replaying the
//! latter must reproduce it line for line.

use std::io::{BufRead, Write};
use std::path::Path;

use hitl_core::metrics::ElectrodeSite;
use hitl_core::pipeline::{ApplyOutcome, EngineEvent, EngineRequest, Snapshot};
use hitl_core::signal::CalibrationConfig;
use hitl_core::sim::{ExecPhase, ObjectId, Scene, SimConfig};
use hitl_core::{DeviceSource, MenuCommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adapters::{DeviceDisplay, DeviceInput};

pub const FORMAT: &str = "hitl-trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigHashes {
    pub scene: String,
    pub sim: String,
    pub calibration: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub device: DeviceSource,
    pub site: ElectrodeSite,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_file: Option<String>,
    pub scene: Scene,
    pub sim: SimConfig,
    pub calibration: CalibrationConfig,
    pub hashes: ConfigHashes,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_json<T: Serialize>(value: &T) -> String {
    sha256_hex(serde_json::to_string(value).expect("config serializes").as_bytes())
}

impl TraceHeader {
    pub fn new(
        device: DeviceSource,
        site: ElectrodeSite,
        scene: Scene,
        scene_file: Option<String>,
        sim: SimConfig,
        calibration: CalibrationConfig,
    ) -> Self {
        let seed = sim.seed;
        let hashes = ConfigHashes {
            scene: hash_json(&scene),
            sim: hash_json(&sim),
            calibration: hash_json(&calibration),
        };
        Self { format: FORMAT.to_string(), device, site, seed, scene_file, scene, sim, calibration, hashes }
    }

    /// Recomputes the config hashes; a mismatch means the header was edited.
    pub fn verify(&self) -> Result<(), TraceError> {
        if self.format != FORMAT {
            return Err(TraceError::Header(format!("unsupported format {:?}", self.format)));
        }
        if self.sim.seed != self.seed {
            return Err(TraceError::Header("seed disagrees with sim config".into()));
        }
        let fresh = Self::new(
            self.device,
            self.site,
            self.scene.clone(),
            self.scene_file.clone(),
            self.sim.clone(),
            self.calibration,
        );
        for (name, a, b) in [
            ("scene", &fresh.hashes.scene, &self.hashes.scene),
            ("sim", &fresh.hashes.sim, &self.hashes.sim),
            ("calibration", &fresh.hashes.calibration, &self.hashes.calibration),
        ] {
            if a != b {
                return Err(TraceError::Header(format!("{name} hash mismatch")));
            }
        }
        Ok(())
    }
}

/// Out-of-band session controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "control", rename_all = "snake_case")]
pub enum Control {
    /// The user gives up on the current object (e.g. it was never
    /// recognized); the attempt ends as a failure.
    Abandon { object: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    #[serde(flatten)]
    pub pipeline: Snapshot,
    pub device: DeviceDisplay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rec", rename_all = "snake_case")]
pub enum RecordBody {
    Input {
        #[serde(flatten)]
        input: DeviceInput,
        /// Client clock, kept for reference only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_t: Option<f64>,
    },
    Control {
        #[serde(flatten)]
        control: Control,
    },
    Rejected { reason: String },
    Command { command: MenuCommand },
    Applied { outcome: ApplyOutcome },
    Request { request: EngineRequest },
    Engine { event: EngineEvent },
    Fault { message: String },
    Outcome {
        object: ObjectId,
        label: String,
        success: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        failed_phase: Option<ExecPhase>,
    },
    Snapshot { snapshot: Box<SessionSnapshot> },
    Closed,
}

impl RecordBody {
    /// Records that drive a session, as opposed to ones it produces.
    pub fn is_driver(&self) -> bool {
        matches!(self, RecordBody::Input { .. } | RecordBody::Control { .. } | RecordBody::Closed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    #[serde(flatten)]
    pub body: RecordBody,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: time {t} precedes {prev}")]
    Regression { line: usize, t: f64, prev: f64 },
    #[error("bad header: {0}")]
    Header(String),
    #[error("empty trace")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trace as read from disk.
#[derive(Debug, Clone)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    /// Raw lines, header first, exactly as read.
    pub lines: Vec<String>,
}

impl TraceFile {
    pub fn parse(reader: impl BufRead) -> Result<Self, TraceError> {
        let mut header = None;
        let mut records = Vec::new();
        let mut lines = Vec::new();
        let mut prev = f64::NEG_INFINITY;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |e: serde_json::Error| TraceError::Parse { line: n, message: e.to_string() };
            if header.is_none() {
                let h: TraceHeader = serde_json::from_str(&line).map_err(parse_err)?;
                h.verify()?;
                header = Some(h);
            } else {
                let rec: TraceRecord = serde_json::from_str(&line).map_err(parse_err)?;
                if !rec.t.is_finite() {
                    return Err(TraceError::Parse { line: n, message: "non-finite time".into() });
                }
                if rec.t < prev {
                    return Err(TraceError::Regression { line: n, t: rec.t, prev });
                }
                prev = rec.t;
                records.push(rec);
            }
            lines.push(line);
        }
        let header = header.ok_or(TraceError::Empty)?;
        Ok(Self { header, records, lines })
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let f = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(f))
    }

    /// True when the file holds only what drives a session.
    pub fn is_script(&self) -> bool {
        self.records.iter().all(|r| r.body.is_driver())
    }

    pub fn drivers(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.body.is_driver())
    }
}

/// Incremental writer that hashes every line and optionally keeps it.
#[derive(Debug, Clone)]
pub struct TraceSink {
    hasher: Sha256,
    lines: Option<Vec<String>>,
    count: usize,
}

impl TraceSink {
    pub fn new(keep_lines: bool) -> Self {
        Self { hasher: Sha256::new(), lines: keep_lines.then(Vec::new), count: 0 }
    }

    pub fn push_line(&mut self, line: String) {
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        self.count += 1;
        if let Some(lines) = &mut self.lines {
            lines.push(line);
        }
    }

    pub fn push<T: Serialize>(&mut self, value: &T) {
        self.push_line(serde_json::to_string(value).expect("record serializes"));
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn lines(&self) -> Option<&[String]> {
        self.lines.as_deref()
    }

    pub fn finish(self) -> (String, Option<Vec<String>>) {
        (hex::encode(self.hasher.finalize()), self.lines)
    }
}

pub fn hash_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn write_lines(path: &Path, lines: &[String]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for l in lines {
        f.write_all(l.as_bytes())?;
        f.write_all(b"\n")?;
    }
    f.flush()
}
