use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::EntityId;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
/// Overrides the command of every external mind backend.
pub const MIND_CMD_ENV: &str = "GEOSIM_MIND_CMD";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Perceive,
    Plan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MindRequest {
    pub agent: EntityId,
    pub tick: u64,
    pub mode: Mode,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MindResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("cannot start `{command}`: {reason}")]
    Spawn { command: String, reason: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error("backend closed the connection")]
    Closed,
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("malformed response `{line}`: {reason}")]
    BadResponse { line: String, reason: String },
}

/// A synchronous request/response channel to a text model.
pub trait Transport {
    fn exchange(&mut self, request: &MindRequest) -> Result<String, TransportError>;
}

impl<F> Transport for F
where
    F: FnMut(&MindRequest) -> Result<String, TransportError>,
{
    fn exchange(&mut self, request: &MindRequest) -> Result<String, TransportError> {
        self(request)
    }
}

/// JSON lines over a child process's stdin/stdout.
pub struct ProcessTransport {
    command: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ProcessTransport {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, TransportError> {
        let spawn_err = |e: std::io::Error| TransportError::Spawn {
            command: command.to_string(),
            reason: e.to_string(),
        };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(spawn_err)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            command: command.to_string(),
            child,
            stdin,
            lines,
            timeout,
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }
}

impl Transport for ProcessTransport {
    fn exchange(&mut self, request: &MindRequest) -> Result<String, TransportError> {
        let mut line = serde_json::to_string(request).map_err(|e| TransportError::Io(e.to_string()))?;
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|()| self.stdin.flush())
            .map_err(|e| TransportError::Io(e.to_string()))?;
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(TransportError::Io(e.to_string())),
            Err(RecvTimeoutError::Timeout) => return Err(TransportError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(TransportError::Closed),
        };
        let parsed: MindResponse = serde_json::from_str(&reply).map_err(|e| TransportError::BadResponse {
            line: reply.clone(),
            reason: e.to_string(),
        })?;
        Ok(parsed.text)
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub agent: EntityId,
    pub tick: u64,
    pub mode: Mode,
    #[serde(default)]
    pub prompt: String,
    pub text: String,
}

/// Responses keyed by (agent, tick, mode), replayed by the scripted backend.
/// Several responses under one key are replayed in recording order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    entries: BTreeMap<(EntityId, u64, Mode), VecDeque<String>>,
}

impl Transcript {
    pub fn insert(&mut self, agent: EntityId, tick: u64, mode: Mode, text: &str) {
        self.entries
            .entry((agent, tick, mode))
            .or_default()
            .push_back(text.to_string());
    }

    /// The next response under the key, without consuming it.
    pub fn get(&self, agent: EntityId, tick: u64, mode: Mode) -> Option<&str> {
        self.entries
            .get(&(agent, tick, mode))
            .and_then(|q| q.front())
            .map(String::as_str)
    }

    /// Consumes the next response under the key.
    pub fn take(&mut self, agent: EntityId, tick: u64, mode: Mode) -> Option<String> {
        self.entries.get_mut(&(agent, tick, mode)).and_then(VecDeque::pop_front)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_exchanges<'a>(log: impl IntoIterator<Item = &'a Exchange>) -> Self {
        let mut t = Self::default();
        for e in log {
            t.insert(e.agent, e.tick, e.mode, &e.text);
        }
        t
    }

    /// Reads JSON lines in the exchange format; prompts are optional.
    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut log = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Exchange = serde_json::from_str(line).map_err(|e| format!("transcript line {}: {e}", i + 1))?;
            log.push(e);
        }
        Ok(Self::from_exchanges(&log))
    }
}

pub fn exchanges_to_jsonl(log: &[Exchange]) -> String {
    log.iter()
        .map(|e| serde_json::to_string(e).expect("exchange serializes") + "\n")
        .collect()
}
