//! Event-stream files.
//!
//! JSON: `{"M": 2, "T": 10.0, "events": [{"t": 0.3, "z": 1, "x": 0, "y": [..]}]}`
//! with 1-based process `z`, origin `x` (0 immigrant, `i` excited by process
//! `i`, absent or null when unknown) and optional mark vector `y`.
//! CSV: columns `t,z[,x]` with an optional header; marks are then absent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::{Event, EventStream, Origin, StreamError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid stream: {0}")]
    Validation(#[from] StreamError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Serialize, Deserialize)]
struct StreamFile {
    #[serde(rename = "M")]
    dim: usize,
    #[serde(rename = "T")]
    horizon: f64,
    events: Vec<EventRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRecord {
    t: f64,
    z: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<Vec<f64>>,
}

/// A stream read from disk plus how many tied timestamps were nudged apart.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadStream {
    pub stream: EventStream,
    pub perturbed: usize,
}

pub fn stream_to_json(stream: &EventStream) -> String {
    let events = stream
        .events
        .iter()
        .enumerate()
        .map(|(j, e)| EventRecord {
            t: e.time,
            z: e.process + 1,
            x: match e.origin {
                Origin::Immigrant => Some(0),
                Origin::Process(i) => Some(i + 1),
                Origin::Unknown => None,
            },
            y: stream.marks_of(j).map(<[f64]>::to_vec),
        })
        .collect();
    let file = StreamFile { dim: stream.dim, horizon: stream.horizon, events };
    let mut s = serde_json::to_string_pretty(&file).expect("stream serializes");
    s.push('\n');
    s
}

fn origin_from(x: Option<usize>) -> Origin {
    match x {
        None => Origin::Unknown,
        Some(0) => Origin::Immigrant,
        Some(i) => Origin::Process(i - 1),
    }
}

fn process_from(z: usize, line: usize) -> Result<usize, IoError> {
    z.checked_sub(1)
        .ok_or_else(|| IoError::Parse { line, message: "process indices are 1-based".into() })
}

/// Moves every timestamp equal to its predecessor up by one ulp.
fn separate_ties(events: &mut [Event]) -> usize {
    let mut count = 0;
    for j in 1..events.len() {
        if events[j].time == events[j - 1].time {
            events[j].time = events[j - 1].time.next_up();
            count += 1;
        }
    }
    count
}

pub fn stream_from_json(text: &str) -> Result<ReadStream, IoError> {
    let file: StreamFile = serde_json::from_str(text)
        .map_err(|e| IoError::Parse { line: e.line(), message: e.to_string() })?;
    let dim = file.dim;
    let has_marks = file.events.iter().all(|e| e.y.is_some());
    let mut events = Vec::with_capacity(file.events.len());
    let mut marks = Vec::new();
    for rec in &file.events {
        events.push(Event { time: rec.t, process: process_from(rec.z, 0)?, origin: origin_from(rec.x) });
        if has_marks {
            let y = rec.y.as_ref().expect("checked above");
            if y.len() != dim {
                return Err(StreamError::MarkShape { got: y.len(), expected: dim }.into());
            }
            marks.extend_from_slice(y);
        }
    }
    finish(dim, file.horizon, events, has_marks.then_some(marks))
}

/// `horizon` defaults to the last event time.
pub fn stream_from_csv(text: &str, dim: Option<usize>, horizon: Option<f64>) -> Result<ReadStream, IoError> {
    let mut events = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        let Ok(t) = fields[0].parse::<f64>() else {
            if events.is_empty() && k == 0 {
                continue; // header
            }
            return Err(IoError::Parse { line, message: format!("bad time '{}'", fields[0]) });
        };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(IoError::Parse { line, message: "expected t,z[,x]".into() });
        }
        let z: usize = fields[1]
            .parse()
            .map_err(|_| IoError::Parse { line, message: format!("bad process '{}'", fields[1]) })?;
        let x = match fields.get(2) {
            None | Some(&"") => None,
            Some(s) => Some(
                s.parse::<usize>()
                    .map_err(|_| IoError::Parse { line, message: format!("bad origin '{s}'") })?,
            ),
        };
        events.push(Event { time: t, process: process_from(z, line)?, origin: origin_from(x) });
    }
    let dim = dim.unwrap_or_else(|| events.iter().map(|e| e.process + 1).max().unwrap_or(1));
    let horizon = horizon.unwrap_or_else(|| events.last().map_or(1.0, |e| e.time));
    finish(dim, horizon, events, None)
}

fn finish(dim: usize, horizon: f64, mut events: Vec<Event>, marks: Option<Vec<f64>>) -> Result<ReadStream, IoError> {
    let perturbed = separate_ties(&mut events);
    let stream = EventStream { dim, horizon, events, marks };
    stream.validate()?;
    Ok(ReadStream { stream, perturbed })
}

/// Reads JSON when the first non-blank character is `{`, CSV otherwise.
pub fn read_event_stream(
    path: &std::path::Path,
    dim: Option<usize>,
    horizon: Option<f64>,
) -> Result<ReadStream, IoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    if text.trim_start().starts_with('{') {
        stream_from_json(&text)
    } else {
        stream_from_csv(&text, dim, horizon)
    }
}
