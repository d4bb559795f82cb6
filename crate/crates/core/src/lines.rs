//! Line-delimited record files: one JSON object per line.
//!
//! Signal traces (`{"t":..,"v":..}`), action traces (`{"t":..,"action":..}`),
//! switch traces (`{"t":..,"kind":..}`) and utterance traces
//! (`{"t":..,"text":..}`) all share this framing. Blank lines and lines
//! starting with `#` are skipped.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LineError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamp {t} is earlier than the previous record ({prev})")]
    Regression { line: usize, t: f64, prev: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Records carrying a timestamp, so readers can enforce ordering.
pub trait Timestamped {
    fn timestamp(&self) -> f64;
}

/// Parses every record, reporting the 1-based line number of the first bad one.
pub fn read_records<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, LineError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = serde_json::from_str(trimmed)
            .map_err(|e| LineError::Parse { line: idx + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

/// Like [`read_records`] but also rejects timestamps that go backwards.
pub fn read_ordered<T, R>(reader: R) -> Result<Vec<T>, LineError>
where
    T: DeserializeOwned + Timestamped,
    R: BufRead,
{
    let mut out: Vec<T> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec: T = serde_json::from_str(trimmed)
            .map_err(|e| LineError::Parse { line: idx + 1, message: e.to_string() })?;
        if let Some(prev) = out.last() {
            if rec.timestamp() < prev.timestamp() {
                return Err(LineError::Regression {
                    line: idx + 1,
                    t: rec.timestamp(),
                    prev: prev.timestamp(),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<T: Serialize, W: Write>(mut writer: W, records: &[T]) -> std::io::Result<()> {
    for rec in records {
        let line = serde_json::to_string(rec).map_err(std::io::Error::other)?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::EmgFrame;

    #[test]
    fn reports_line_numbers() {
        let text = "{\"t\":0.0,\"v\":1.0}\n\n# comment\n{\"t\":0.1,\"v\":oops}\n";
        let err = read_records::<EmgFrame, _>(text.as_bytes()).unwrap_err();
        assert!(matches!(err, LineError::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn ordered_reader_rejects_regression() {
        let text = "{\"t\":1.0,\"v\":0.0}\n{\"t\":0.5,\"v\":0.0}\n";
        let err = read_ordered::<EmgFrame, _>(text.as_bytes()).unwrap_err();
        assert!(matches!(err, LineError::Regression { line: 2, .. }));
    }
}
