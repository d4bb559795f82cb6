//! Device adapters: raw device input in, [`MenuCommand`]s out.

use hitl_core::pipeline::ButtonSet;
use hitl_core::signal::{CalibrationConfig, CursorAction, EmgFrame, EmgProcessor, SignalError};
use hitl_core::switch::{self, SwitchError, SwitchEvent, SwitchEventKind, SwitchState};
use hitl_core::voice::{self, VoiceError};
use hitl_core::{CommandKind, DeviceSource, MenuCommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One raw input from a device. The timestamp travels alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "input", rename_all = "snake_case")]
pub enum DeviceInput {
    /// A mouse or on-screen click.
    Click { command: CommandKind },
    Switch { kind: SwitchEventKind },
    Utterance { text: String },
    Emg { v: f64 },
}

impl DeviceInput {
    pub fn name(&self) -> &'static str {
        match self {
            DeviceInput::Click { .. } => "click",
            DeviceInput::Switch { .. } => "switch",
            DeviceInput::Utterance { .. } => "utterance",
            DeviceInput::Emg { .. } => "emg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Rejection {
    #[error("{input} input does not belong to the {device} device")]
    WrongDevice { input: &'static str, device: DeviceSource },
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Voice(#[from] VoiceError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Device-specific status shown next to the pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceDisplay {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_message: Option<String>,
    /// Gained sEMG power with the low and high markers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerBar>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBar {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone)]
enum Inner {
    Click,
    Switch(SwitchState),
    Voice,
    Semg { processor: EmgProcessor, power: f64 },
}

/// Stateful adapter for one session's device.
#[derive(Debug, Clone)]
pub struct Adapter {
    device: DeviceSource,
    inner: Inner,
}

impl Adapter {
    pub fn new(device: DeviceSource, calibration: &CalibrationConfig) -> Result<Self, SignalError> {
        let inner = match device {
            DeviceSource::Mouse | DeviceSource::Direct => Inner::Click,
            DeviceSource::Switch => Inner::Switch(SwitchState::Waiting),
            DeviceSource::Voice => Inner::Voice,
            DeviceSource::Semg => {
                Inner::Semg { processor: EmgProcessor::new(*calibration)?, power: 0.0 }
            }
        };
        Ok(Self { device, inner })
    }

    pub fn device(&self) -> DeviceSource {
        self.device
    }

    /// Turns one input into at most one command. `buttons` is what the
    /// screen currently offers; only voice needs it.
    pub fn feed(
        &mut self,
        t: f64,
        input: &DeviceInput,
        buttons: &ButtonSet,
    ) -> Result<Option<MenuCommand>, Rejection> {
        let device = self.device;
        let cmd = |kind| Some(MenuCommand::new(t, kind, device));
        match (&mut self.inner, input) {
            (Inner::Click, DeviceInput::Click { command }) => Ok(cmd(*command)),
            (Inner::Switch(state), DeviceInput::Switch { kind }) => {
                let (next, kind) = switch::on_event(*state, SwitchEvent { t, kind: *kind })?;
                *state = next;
                Ok(kind.and_then(cmd))
            }
            (Inner::Voice, DeviceInput::Utterance { text }) => {
                let button = voice::interpret(text, buttons)?;
                Ok(Some(MenuCommand::select_button(t, button, device)))
            }
            (Inner::Semg { processor, power }, DeviceInput::Emg { v }) => {
                let step = processor.push(EmgFrame::new(t, *v))?;
                *power = step.power;
                Ok(match step.action {
                    CursorAction::None => None,
                    CursorAction::Cycle => cmd(CommandKind::Cycle),
                    CursorAction::Select => cmd(CommandKind::Select),
                })
            }
            (_, other) => Err(Rejection::WrongDevice { input: other.name(), device }),
        }
    }

    /// Advances time-driven display state.
    pub fn tick(&mut self, now: f64) {
        if let Inner::Switch(state) = &mut self.inner {
            *state = switch::tick(*state, now).0;
        }
    }

    pub fn display(&self) -> DeviceDisplay {
        match &self.inner {
            Inner::Switch(state) => DeviceDisplay {
                switch_message: Some(state.message().to_string()),
                power: None,
            },
            Inner::Semg { processor, power } => {
                let cfg = processor.config();
                DeviceDisplay {
                    switch_message: None,
                    power: Some(PowerBar {
                        value: power * cfg.gain,
                        low: cfg.low_threshold,
                        high: cfg.high_threshold,
                    }),
                }
            }
            Inner::Click | Inner::Voice => DeviceDisplay::default(),
        }
    }
}
