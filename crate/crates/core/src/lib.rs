//! Core of a deterministic human-in-the-loop assistive grasping simulator.
//!
//! Four input devices (mouse, voice, single switch, sEMG) are reduced to a
//! two-command vocabulary ([`command::CommandKind`]) that drives the
//! five-stage grasp planner in [`pipeline`]. The planner talks to a seeded
//! tabletop simulation in [`sim`], and [`metrics`] turns session timelines
//! into per-device timing and success tables.
//!
//! ```text
//! sEMG frames ──► signal ─┐
//! switch events ► switch ─┤
//! utterances ───► voice ──┼─► MenuCommand ─► pipeline ◄──► sim
//! mouse clicks ───────────┘                     │
//!                                               └─► snapshots ─► metrics
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod command;
pub mod lines;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod signal;
pub mod sim;
pub mod switch;
pub mod voice;

pub use command::{CommandKind, DeviceSource, MenuCommand};
pub use pipeline::{ButtonId, ButtonSet, EngineEvent, EngineRequest, Pipeline, PipelineState};
pub use sim::{SimConfig, Simulation};
