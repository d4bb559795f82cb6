//! sEMG control: RMS power envelope, Rest/Medium/High levels and debounced
//! Cycle/Select emission.
//!
//! A single electrode produces one amplitude stream. Its smoothed RMS power,
//! scaled by a gain, is compared against a low and a high threshold. Holding
//! a medium contraction moves the highlight (Cycle); a strong contraction
//! selects (Select). Spurious activity is suppressed by three mechanisms:
//!
//! * a dwell time a Medium level must persist before it registers,
//! * a latch that blocks further actions until the signal returns to Rest
//!   and a refractory period has elapsed,
//! * hysteresis on downward level transitions.
//!
//! A strong flex necessarily rises through the Medium band. Because Select
//! fires on the first High frame and Cycle needs the full dwell, a fast
//! strong flex yields a Select only.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lines::Timestamped;
use crate::par::{self, Execution};

/// Timestamps closer than this are treated as equal.
pub const TIME_EPSILON: f64 = 1e-9;

/// Threshold placement between the rest and flex power distributions.
pub const LOW_FRACTION: f64 = 0.25;
pub const HIGH_FRACTION: f64 = 0.70;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmgFrame {
    /// Seconds, strictly increasing within a stream.
    pub t: f64,
    /// Normalized amplitude.
    pub v: f64,
}

impl EmgFrame {
    pub fn new(t: f64, v: f64) -> Self {
        Self { t, v }
    }
}

impl Timestamped for EmgFrame {
    fn timestamp(&self) -> f64 {
        self.t
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("timestamps must strictly increase: {prev} then {next}")]
    NonMonotonic { prev: f64, next: f64 },
    #[error("non-finite sample at t={0}")]
    NonFinite(f64),
    #[error("invalid calibration: {0}")]
    InvalidConfig(String),
    #[error("flex power (median {flex_median}) is not separable from rest power (p95 {rest_p95})")]
    CalibrationFailed { rest_p95: f64, flex_median: f64 },
    #[error("{which} recording spans {span} s, calibration needs at least {needed} s")]
    InsufficientData { which: &'static str, span: f64, needed: f64 },
}

/// Gain, thresholds and timing for the sEMG controller.
///
/// Thresholds are expressed in gained power units, the same units the power
/// bar displays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub gain: f64,
    pub low_threshold: f64,
    pub high_threshold: f64,
    /// RMS window length in seconds.
    pub rms_window: f64,
    /// Seconds a Medium level must be held before a Cycle fires.
    pub dwell: f64,
    /// Minimum seconds between an action and re-arming.
    pub refractory: f64,
    /// Fractional relaxation of a threshold when falling back through it.
    pub hysteresis_ratio: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            gain: 1.0,
            low_threshold: LOW_FRACTION,
            high_threshold: HIGH_FRACTION,
            rms_window: 0.2,
            dwell: 0.15,
            refractory: 0.5,
            hysteresis_ratio: 0.1,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |m: &str| Err(SignalError::InvalidConfig(m.to_string()));
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return bad("gain must be positive");
        }
        if !(self.low_threshold >= 0.0 && self.high_threshold > self.low_threshold) {
            return bad("thresholds must satisfy high > low >= 0");
        }
        if !(self.rms_window > 0.0) {
            return bad("rms_window must be positive");
        }
        if !(self.dwell >= 0.0 && self.refractory >= 0.0) {
            return bad("dwell and refractory must be non-negative");
        }
        if !(0.0..1.0).contains(&self.hysteresis_ratio) {
            return bad("hysteresis_ratio must lie in [0, 1)");
        }
        Ok(())
    }

    /// Thresholds converted back to un-gained power units.
    pub fn raw_thresholds(&self) -> (f64, f64) {
        (self.low_threshold / self.gain, self.high_threshold / self.gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalLevel {
    Rest,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CursorAction {
    None,
    Cycle,
    Select,
}

/// An emitted Cycle or Select.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    pub t: f64,
    pub action: CursorAction,
}

impl Timestamped for TimedAction {
    fn timestamp(&self) -> f64 {
        self.t
    }
}

/// Root-mean-square of the samples with timestamps in `(at - window, at]`.
///
/// Returns 0 when no sample falls inside the window, including when
/// `window <= 0`. `frames` must be sorted by time.
pub fn rms_window(frames: &[EmgFrame], window: f64, at: f64) -> f64 {
    let lo = frames.partition_point(|f| f.t <= at - window + TIME_EPSILON);
    let hi = frames.partition_point(|f| f.t <= at + TIME_EPSILON);
    if hi <= lo {
        return 0.0;
    }
    mean_square_root(frames[lo..hi].iter().map(|f| f.v))
}

fn mean_square_root(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// RMS power evaluated at every frame's own timestamp.
///
/// Each entry is computed independently from the raw samples, so sequential
/// and parallel execution give bit-identical output.
pub fn power_envelope(frames: &[EmgFrame], window: f64, mode: Execution) -> Vec<f64> {
    par::map(frames, mode, |f| rms_window(frames, window, f.t))
}

/// Maps gained power to a level, given the previous level.
///
/// Rising into a level requires reaching its threshold. Staying in a level
/// at or below `prev` only requires `threshold * (1 - hysteresis_ratio)`.
pub fn classify_level(power: f64, prev: SignalLevel, cfg: &CalibrationConfig) -> SignalLevel {
    let p = cfg.gain * power;
    let relaxed = 1.0 - cfg.hysteresis_ratio;
    let holds = |level: SignalLevel, threshold: f64| {
        if level <= prev {
            p >= threshold * relaxed
        } else {
            p >= threshold
        }
    };
    if holds(SignalLevel::High, cfg.high_threshold) {
        SignalLevel::High
    } else if holds(SignalLevel::Medium, cfg.low_threshold) {
        SignalLevel::Medium
    } else {
        SignalLevel::Rest
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Latch {
    Armed,
    Latched { at: f64 },
}

/// Turns a timestamped level stream into debounced actions.
#[derive(Debug, Clone)]
pub struct ActionDetector {
    dwell: f64,
    refractory: f64,
    last_t: Option<f64>,
    medium_since: Option<f64>,
    latch: Latch,
}

impl ActionDetector {
    pub fn new(cfg: &CalibrationConfig) -> Self {
        Self {
            dwell: cfg.dwell,
            refractory: cfg.refractory,
            last_t: None,
            medium_since: None,
            latch: Latch::Armed,
        }
    }

    pub fn is_armed(&self) -> bool {
        self.latch == Latch::Armed
    }

    pub fn push(&mut self, t: f64, level: SignalLevel) -> Result<CursorAction, SignalError> {
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(SignalError::NonMonotonic { prev, next: t });
            }
        }
        self.last_t = Some(t);

        self.medium_since = match level {
            SignalLevel::Medium => Some(self.medium_since.unwrap_or(t)),
            _ => None,
        };

        let action = match self.latch {
            Latch::Latched { at } => {
                if level == SignalLevel::Rest && t - at >= self.refractory - TIME_EPSILON {
                    self.latch = Latch::Armed;
                }
                CursorAction::None
            }
            Latch::Armed => match level {
                SignalLevel::High => CursorAction::Select,
                SignalLevel::Medium => {
                    let since = self.medium_since.unwrap_or(t);
                    if t - since >= self.dwell - TIME_EPSILON {
                        CursorAction::Cycle
                    } else {
                        CursorAction::None
                    }
                }
                SignalLevel::Rest => CursorAction::None,
            },
        };
        if action != CursorAction::None {
            self.latch = Latch::Latched { at: t };
        }
        Ok(action)
    }
}

/// Runs [`ActionDetector`] over a whole level stream.
pub fn emit_actions(
    levels: &[(f64, SignalLevel)],
    cfg: &CalibrationConfig,
) -> Result<Vec<TimedAction>, SignalError> {
    let mut detector = ActionDetector::new(cfg);
    let mut out = Vec::new();
    for &(t, level) in levels {
        let action = detector.push(t, level)?;
        if action != CursorAction::None {
            out.push(TimedAction { t, action });
        }
    }
    Ok(out)
}

/// Result of pushing one frame through [`EmgProcessor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmgStep {
    /// Un-gained RMS power.
    pub power: f64,
    pub level: SignalLevel,
    pub action: CursorAction,
}

/// Streaming frame → power → level → action chain.
///
/// Power at each frame equals [`rms_window`] over the frames seen so far,
/// summed in the same order, so offline and streaming results match exactly.
#[derive(Debug, Clone)]
pub struct EmgProcessor {
    cfg: CalibrationConfig,
    window: VecDeque<EmgFrame>,
    level: SignalLevel,
    detector: ActionDetector,
}

impl EmgProcessor {
    pub fn new(cfg: CalibrationConfig) -> Result<Self, SignalError> {
        cfg.validate()?;
        Ok(Self {
            detector: ActionDetector::new(&cfg),
            cfg,
            window: VecDeque::new(),
            level: SignalLevel::Rest,
        })
    }

    pub fn config(&self) -> &CalibrationConfig {
        &self.cfg
    }

    pub fn level(&self) -> SignalLevel {
        self.level
    }

    pub fn push(&mut self, frame: EmgFrame) -> Result<EmgStep, SignalError> {
        if !frame.v.is_finite() || !frame.t.is_finite() {
            return Err(SignalError::NonFinite(frame.t));
        }
        if let Some(last) = self.window.back() {
            if frame.t <= last.t {
                return Err(SignalError::NonMonotonic { prev: last.t, next: frame.t });
            }
        }
        self.window.push_back(frame);
        let cutoff = frame.t - self.cfg.rms_window + TIME_EPSILON;
        while self.window.front().is_some_and(|f| f.t <= cutoff) {
            self.window.pop_front();
        }
        let power = mean_square_root(self.window.iter().map(|f| f.v));
        self.level = classify_level(power, self.level, &self.cfg);
        let action = self.detector.push(frame.t, self.level)?;
        Ok(EmgStep { power, level: self.level, action })
    }
}

/// Full offline chain over a recorded signal.
pub fn process_frames(
    frames: &[EmgFrame],
    cfg: &CalibrationConfig,
) -> Result<Vec<TimedAction>, SignalError> {
    let mut processor = EmgProcessor::new(*cfg)?;
    let mut out = Vec::new();
    for &frame in frames {
        let step = processor.push(frame)?;
        if step.action != CursorAction::None {
            out.push(TimedAction { t: frame.t, action: step.action });
        }
    }
    Ok(out)
}

/// Linear-interpolated quantile of an unsorted sample, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Power values at every frame whose window is fully covered by the recording.
fn steady_powers(
    frames: &[EmgFrame],
    window: f64,
    which: &'static str,
) -> Result<Vec<f64>, SignalError> {
    let span = match (frames.first(), frames.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0.0,
    };
    if span < 2.0 * window - TIME_EPSILON {
        return Err(SignalError::InsufficientData { which, span, needed: 2.0 * window });
    }
    let start = frames[0].t + window - TIME_EPSILON;
    Ok(frames
        .iter()
        .filter(|f| f.t >= start)
        .map(|f| rms_window(frames, window, f.t))
        .collect())
}

/// Derives gain and thresholds from a relaxed and a flexed recording.
///
/// With `r` the 95th percentile of rest power and `f` the median flex power,
/// the raw thresholds sit at `r + 0.25 (f - r)` and `r + 0.70 (f - r)`. The
/// gain `1 / f` normalizes the flex median to 1, and the stored thresholds
/// are the raw ones multiplied by that gain. Timing fields come from `base`.
pub fn calibrate(
    rest_frames: &[EmgFrame],
    flex_frames: &[EmgFrame],
    base: &CalibrationConfig,
) -> Result<CalibrationConfig, SignalError> {
    let window = base.rms_window;
    let rest = steady_powers(rest_frames, window, "rest")?;
    let flex = steady_powers(flex_frames, window, "flex")?;
    let rest_p95 = quantile(&rest, 0.95);
    let flex_median = quantile(&flex, 0.5);
    if !(flex_median > rest_p95) || flex_median <= 0.0 {
        return Err(SignalError::CalibrationFailed { rest_p95, flex_median });
    }
    let spread = flex_median - rest_p95;
    let gain = 1.0 / flex_median;
    let cfg = CalibrationConfig {
        gain,
        low_threshold: (rest_p95 + LOW_FRACTION * spread) * gain,
        high_threshold: (rest_p95 + HIGH_FRACTION * spread) * gain,
        ..*base
    };
    cfg.validate()?;
    Ok(cfg)
}
