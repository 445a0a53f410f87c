//! Discrete-event time management.
//!
//! Events are ordered by `(time, priority, seq)`: earlier time first, then
//! lower priority value, then insertion order. The scheduler is a single
//! consumer; handlers run one at a time and may schedule further events.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::EntityId;

/// Who an event is addressed to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", content = "name", rename_all = "lowercase")]
pub enum Target {
    Global,
    Layer(String),
    Agent(EntityId),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Global => f.write_str("global"),
            Target::Layer(name) => write!(f, "layer {name}"),
            Target::Agent(id) => write!(f, "agent {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Payload {
    /// The recurring integer-time step.
    Tick {
        tick: u64,
    },
    /// An agent-scheduled activation between ticks.
    Wake {
        action: String,
    },
    Custom {
        label: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub priority: i32,
    pub seq: u64,
    pub target: Target,
    pub payload: Payload,
}

impl Event {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.priority.cmp(&other.priority))
            .then(self.seq.cmp(&other.seq))
    }
}

// Min-heap wrapper.
#[derive(Debug)]
struct Queued(Event);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.0.key_cmp(&other.0) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.key_cmp(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DevsError {
    #[error("cannot schedule at {time}: clock is already at {now}")]
    PastTime { time: f64, now: f64 },
    #[error("event time {0} is not a finite non-negative number")]
    BadTime(f64),
    #[error("horizon {horizon} is before the clock ({now})")]
    BadHorizon { horizon: f64, now: f64 },
}

/// A handler failure, with every event processed before it (the failing one last).
#[derive(Debug, Error)]
#[error("event handler failed at t={} ({}): {source}", .trace.last().map_or(0.0, |e| e.time), .trace.last().map_or(String::new(), |e| e.target.to_string()))]
pub struct RunError<E: std::error::Error + 'static> {
    pub trace: Vec<Event>,
    #[source]
    pub source: E,
}

#[derive(Debug, Default)]
pub struct Scheduler {
    queue: BinaryHeap<Queued>,
    now: f64,
    next_seq: u64,
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.queue.peek().map(|q| q.0.time)
    }

    /// Queues an event and returns its sequence number.
    pub fn schedule(&mut self, time: f64, priority: i32, target: Target, payload: Payload) -> Result<u64, DevsError> {
        if !time.is_finite() || time < 0.0 {
            return Err(DevsError::BadTime(time));
        }
        if time < self.now {
            return Err(DevsError::PastTime { time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(Event {
            time,
            priority,
            seq,
            target,
            payload,
        }));
        Ok(seq)
    }

    /// Removes and returns the next event, advancing the clock to its time.
    pub fn pop(&mut self) -> Option<Event> {
        let Queued(ev) = self.queue.pop()?;
        self.now = ev.time;
        Some(ev)
    }

    /// Events still queued, in processing order.
    pub fn pending(&self) -> Vec<Event> {
        let mut all: Vec<Event> = self.queue.iter().map(|q| q.0.clone()).collect();
        all.sort_by(Event::key_cmp);
        all
    }

    /// Processes events in order until the queue drains or the next event
    /// lies beyond `horizon`. A drained queue leaves the clock at `horizon`;
    /// otherwise it rests at the last processed time.
    pub fn run_until<E, F>(&mut self, horizon: f64, mut handler: F) -> Result<Vec<Event>, RunError<E>>
    where
        E: std::error::Error + From<DevsError> + 'static,
        F: FnMut(&Event, &mut Scheduler) -> Result<(), E>,
    {
        if horizon.is_nan() || horizon < self.now {
            return Err(RunError {
                trace: Vec::new(),
                source: DevsError::BadHorizon { horizon, now: self.now }.into(),
            });
        }
        let mut trace = Vec::new();
        while self.peek_time().is_some_and(|t| t <= horizon) {
            let ev = self.pop().expect("peeked");
            let outcome = handler(&ev, self);
            trace.push(ev);
            if let Err(source) = outcome {
                return Err(RunError { trace, source });
            }
        }
        if self.queue.is_empty() {
            self.now = horizon;
        }
        Ok(trace)
    }
}
