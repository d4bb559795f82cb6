//! Spoken commands of the form "<wake word>, tell the robot <label>".
//!
//! Transcripts arrive as text. The phrase after the trigger must name one of
//! the buttons currently on screen; matching is exact after case folding,
//! punctuation stripping and whitespace collapsing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lines::Timestamped;
use crate::pipeline::{ButtonId, ButtonSet};

pub const TRIGGER: [&str; 3] = ["tell", "the", "robot"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub t: f64,
    pub text: String,
}

impl Timestamped for Utterance {
    fn timestamp(&self) -> f64 {
        self.t
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VoiceError {
    #[error("utterance does not contain \"tell the robot\"")]
    NotACommand,
    #[error("nothing follows \"tell the robot\"")]
    EmptyCommand,
    #[error("no button labeled \"{0}\" is available")]
    UnknownCommand(String),
    #[error("\"{0}\" matches more than one button")]
    AmbiguousCommand(String),
}

/// Lowercases, turns punctuation into spaces and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Extracts the command phrase following the trigger.
///
/// Anything before the trigger (typically the wake word) is ignored. The
/// returned phrase keeps the speaker's casing with whitespace collapsed.
pub fn parse_utterance(text: &str) -> Result<String, VoiceError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let folded: Vec<String> = tokens.iter().map(|t| normalize(t)).collect();
    let start = folded
        .windows(TRIGGER.len())
        .position(|w| w.iter().zip(TRIGGER).all(|(a, b)| a == b))
        .ok_or(VoiceError::NotACommand)?;
    let phrase = tokens[start + TRIGGER.len()..].join(" ");
    if normalize(&phrase).is_empty() {
        return Err(VoiceError::EmptyCommand);
    }
    Ok(phrase)
}

/// Resolves a phrase against the buttons currently available.
///
/// An empty button set (the input-locked recognition stage) resolves
/// nothing and yields `UnknownCommand`.
pub fn resolve_command(phrase: &str, buttons: &ButtonSet) -> Result<ButtonId, VoiceError> {
    let wanted = normalize(phrase);
    let mut hits = buttons.ids().filter(|id| normalize(id.label()) == wanted);
    match (hits.next(), hits.next()) {
        (Some(id), None) => Ok(id),
        (None, _) => Err(VoiceError::UnknownCommand(phrase.to_string())),
        (Some(_), Some(_)) => Err(VoiceError::AmbiguousCommand(phrase.to_string())),
    }
}

/// Parses and resolves in one step.
pub fn interpret(text: &str, buttons: &ButtonSet) -> Result<ButtonId, VoiceError> {
    resolve_command(&parse_utterance(text)?, buttons)
}
