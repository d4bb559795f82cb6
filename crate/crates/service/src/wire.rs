//! Messages exchanged with a live client, one JSON object per text frame.
//!
//! ```text
//! server → client  {"dir":"to_client","t":3.25,"kind":"snapshot","body":{...}}
//! client → server  {"dir":"to_server","kind":"device_event","body":{"input":"switch","kind":"press"}}
//! client → server  {"dir":"to_server","kind":"utterance","body":{"text":"Alexa, tell the robot pause"}}
//! ```
//!
//! The server stamps every inbound message with its own clock. A client time
//! may be sent as `client_t`; it is written to the trace and otherwise ignored.

use serde::{Deserialize, Serialize};

use crate::adapters::DeviceInput;
use crate::trace::{Control, SessionSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToClient,
    ToServer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum WireBody {
    /// The session snapshot, exactly as recorded in the trace.
    Snapshot(Box<SessionSnapshot>),
    DeviceEvent(DeviceInput),
    Utterance { text: String },
    Control(Control),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub dir: Direction,
    /// Server time; only set on messages to the client.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_t: Option<f64>,
    #[serde(flatten)]
    pub body: WireBody,
}

impl WireMessage {
    pub fn snapshot(t: f64, snapshot: SessionSnapshot) -> Self {
        Self { dir: Direction::ToClient, t: Some(t), client_t: None, body: WireBody::Snapshot(Box::new(snapshot)) }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self { dir: Direction::ToClient, t: None, client_t: None, body: WireBody::Error { message: message.into() } }
    }

    pub fn to_server(body: WireBody) -> Self {
        Self { dir: Direction::ToServer, t: None, client_t: None, body }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire message serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// What an inbound message asks the session to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Input(DeviceInput),
    Control(Control),
}

impl WireBody {
    /// Inbound meaning of a client message, or why it has none.
    pub fn inbound(self) -> Result<Inbound, String> {
        match self {
            WireBody::DeviceEvent(input) => Ok(Inbound::Input(input)),
            WireBody::Utterance { text } => Ok(Inbound::Input(DeviceInput::Utterance { text })),
            WireBody::Control(c) => Ok(Inbound::Control(c)),
            WireBody::Snapshot(_) | WireBody::Error { .. } => Err("clients may not send snapshots or errors".into()),
        }
    }
}
