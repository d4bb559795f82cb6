//! The universal two-command vocabulary every input adapter reduces to.

use serde::{Deserialize, Serialize};

use crate::pipeline::ButtonId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// Move the green highlight to the next button.
    Cycle,
    /// Activate the highlighted button.
    Select,
}

/// Which input device produced a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceSource {
    Mouse,
    Semg,
    Switch,
    Voice,
    Direct,
}

impl DeviceSource {
    pub fn label(self) -> &'static str {
        match self {
            DeviceSource::Mouse => "mouse",
            DeviceSource::Semg => "semg",
            DeviceSource::Switch => "switch",
            DeviceSource::Voice => "voice",
            DeviceSource::Direct => "direct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mouse" => Some(DeviceSource::Mouse),
            "semg" | "emg" => Some(DeviceSource::Semg),
            "switch" => Some(DeviceSource::Switch),
            "voice" | "alexa" => Some(DeviceSource::Voice),
            "direct" => Some(DeviceSource::Direct),
            _ => None,
        }
    }
}

impl std::fmt::Display for DeviceSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A timestamped command on its way into the pipeline.
///
/// Voice commands name the button they resolved to in `target`; a `Select`
/// with a target activates that button directly instead of the highlighted
/// one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuCommand {
    pub t: f64,
    pub kind: CommandKind,
    pub source: DeviceSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ButtonId>,
}

impl MenuCommand {
    pub fn new(t: f64, kind: CommandKind, source: DeviceSource) -> Self {
        Self { t, kind, source, target: None }
    }

    pub fn select_button(t: f64, button: ButtonId, source: DeviceSource) -> Self {
        Self { t, kind: CommandKind::Select, source, target: Some(button) }
    }
}
