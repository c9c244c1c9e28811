//! Event streams, origin labels and branching structures.
//!
//! Process indices are 0-based in memory. File formats convert to the 1-based
//! convention at the boundary (see [`crate::io`]).

use thiserror::Error;

/// What triggered an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    /// Generated by the background rate.
    Immigrant,
    /// Excited by process `i` (edge effect or an earlier event).
    Process(usize),
    /// The sampler that produced the event cannot tell.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub process: usize,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("event {index}: r strictly increasing violated ({prev} then {time})")]
    NotIncreasing { index: usize, prev: f64, time: f64 },
    #[error("event {index}: time {time} outside (0, T]")]
    OutOfWindow { index: usize, time: f64 },
    #[error("event {index}: process {process} outside 0..{dim}")]
    BadProcess { index: usize, process: usize, dim: usize },
    #[error("event {index}: origin {origin} outside 0..{dim}")]
    BadOrigin { index: usize, origin: usize, dim: usize },
    #[error("mark table has {got} entries, expected {expected}")]
    MarkShape { got: usize, expected: usize },
    #[error("event {index}: negative or non-finite mark")]
    BadMark { index: usize },
    #[error("horizon must be positive and finite")]
    BadHorizon,
}

/// Sorted events of all processes on `(0, T]` with optional mark vectors.
///
/// When present, `marks[j * dim + m]` is the jump event `j` adds to the
/// intensity of process `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub dim: usize,
    pub horizon: f64,
    pub events: Vec<Event>,
    pub marks: Option<Vec<f64>>,
}

impl EventStream {
    pub fn new(dim: usize, horizon: f64) -> Self {
        Self { dim, horizon, events: Vec::new(), marks: Some(Vec::new()) }
    }

    pub fn unmarked(dim: usize, horizon: f64, events: Vec<Event>) -> Self {
        Self { dim, horizon, events, marks: None }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn has_marks(&self) -> bool {
        self.marks.is_some()
    }

    pub fn push(&mut self, event: Event, marks: &[f64]) {
        debug_assert_eq!(marks.len(), self.dim);
        self.events.push(event);
        if let Some(table) = self.marks.as_mut() {
            table.extend_from_slice(marks);
        }
    }

    /// Mark vector of event `j`.
    pub fn marks_of(&self, j: usize) -> Option<&[f64]> {
        self.marks.as_ref().map(|t| &t[j * self.dim..(j + 1) * self.dim])
    }

    /// Jump event `j` adds to process `m`.
    #[inline]
    pub fn mark(&self, j: usize, m: usize) -> Option<f64> {
        self.marks.as_ref().map(|t| t[j * self.dim + m])
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.time)
    }

    /// Event times of process `m`, `t^m`.
    pub fn times_of(&self, m: usize) -> Vec<f64> {
        self.events.iter().filter(|e| e.process == m).map(|e| e.time).collect()
    }

    /// Global indices of the events of each process.
    pub fn indices_by_process(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.dim];
        for (j, e) in self.events.iter().enumerate() {
            out[e.process].push(j);
        }
        out
    }

    /// `N^m(T)` for every process.
    pub fn counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for e in &self.events {
            out[e.process] += 1;
        }
        out
    }

    /// Counting process `N^m(t)` (events at or before `t`).
    pub fn count_until(&self, m: usize, t: f64) -> usize {
        self.events.iter().take_while(|e| e.time <= t).filter(|e| e.process == m).count()
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(StreamError::BadHorizon);
        }
        let mut prev = 0.0;
        for (index, e) in self.events.iter().enumerate() {
            if !(e.time > 0.0 && e.time <= self.horizon) {
                return Err(StreamError::OutOfWindow { index, time: e.time });
            }
            if index > 0 && e.time <= prev {
                return Err(StreamError::NotIncreasing { index, prev, time: e.time });
            }
            if e.process >= self.dim {
                return Err(StreamError::BadProcess { index, process: e.process, dim: self.dim });
            }
            if let Origin::Process(i) = e.origin {
                if i >= self.dim {
                    return Err(StreamError::BadOrigin { index, origin: i, dim: self.dim });
                }
            }
            prev = e.time;
        }
        if let Some(table) = &self.marks {
            let expected = self.events.len() * self.dim;
            if table.len() != expected {
                return Err(StreamError::MarkShape { got: table.len(), expected });
            }
            for (k, &y) in table.iter().enumerate() {
                if !(y >= 0.0 && y.is_finite()) {
                    return Err(StreamError::BadMark { index: k / self.dim.max(1) });
                }
            }
        }
        Ok(())
    }
}

/// Latent parent of one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parent {
    /// Background immigrant, `(A)_{00} = 1`.
    Immigrant,
    /// Offspring of the pre-window edge effect of process `i`, `(A)_{i0} = 1`.
    EdgeEffect(usize),
    /// Offspring of the earlier event with this global index, `(A)_{ik} = 1`.
    Event(usize),
}

/// One parent label per event, indexed like `EventStream::events`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchingStructure {
    pub parents: Vec<Parent>,
}

impl BranchingStructure {
    pub fn all_immigrants(n: usize) -> Self {
        Self { parents: vec![Parent::Immigrant; n] }
    }

    /// Checks that every offspring points to a strictly earlier event.
    pub fn is_consistent_with(&self, stream: &EventStream) -> bool {
        self.parents.len() == stream.len()
            && self.parents.iter().enumerate().all(|(j, p)| match *p {
                Parent::Immigrant => true,
                Parent::EdgeEffect(i) => i < stream.dim,
                Parent::Event(k) => k < j && stream.events[k].time < stream.events[j].time,
            })
    }

    pub fn immigrant_counts(&self, stream: &EventStream) -> Vec<usize> {
        let mut out = vec![0; stream.dim];
        for (p, e) in self.parents.iter().zip(&stream.events) {
            if *p == Parent::Immigrant {
                out[e.process] += 1;
            }
        }
        out
    }
}
