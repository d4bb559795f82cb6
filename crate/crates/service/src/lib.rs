//! Session orchestration around `hitl_core`: device adapters, traces,
//! replay, scripted users, batch runs and the live WebSocket server.

pub mod adapters;
pub mod bench;
pub mod live;
pub mod script;
pub mod session;
pub mod trace;
pub mod wire;
