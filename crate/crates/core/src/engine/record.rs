use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::arm::{AgentInternalState, Election, PossibilisticState};
use crate::devs::Event;
use crate::gas::GasSnapshot;
use crate::ids::EntityId;
use crate::magi::Environment;
use crate::value::{ParamMap, Value};

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Which output streams a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outputs {
    pub trajectory: bool,
    pub agents: bool,
    pub events: bool,
    pub summary: bool,
    pub transcript: bool,
}

impl Outputs {
    /// From run-block output names; none named means trajectory and summary.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        if names.is_empty() {
            return Self {
                trajectory: true,
                summary: true,
                ..Self::default()
            };
        }
        let mut o = Self::default();
        for n in names {
            match n.as_ref() {
                "trajectory" => o.trajectory = true,
                "agents" => o.agents = true,
                "events" => o.events = true,
                "summary" => o.summary = true,
                "transcript" => o.transcript = true,
                _ => {}
            }
        }
        o
    }
}

#[derive(Serialize)]
struct Header<'a> {
    record: &'static str,
    scenario_sha256: &'a str,
    seed: u64,
    ticks: u64,
    stride: u64,
}

#[derive(Serialize)]
struct ParamLine<'a> {
    record: &'static str,
    tick: u64,
    layer: Option<&'a str>,
    params: &'a ParamMap,
}

#[derive(Serialize)]
struct AgentLine<'a> {
    tick: u64,
    id: EntityId,
    #[serde(rename = "type")]
    kind: &'a str,
    beliefs: &'a BTreeMap<String, crate::arm::Belief>,
    goals: &'a [crate::arm::Goal],
    intentions: &'a [crate::arm::GoalId],
    preferences: &'a BTreeMap<crate::arm::GoalId, f64>,
    commitments: &'a [crate::arm::Commitment],
    plans: Vec<&'a crate::arm::Plan>,
    history_len: usize,
    last_history: Option<&'a crate::arm::HistoryRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    possibility: Option<&'a PossibilisticState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    election: Option<&'a Election>,
}

/// Collects output records. The trajectory body (everything but the
/// header) is always hashed, whether or not its text is kept.
pub(crate) struct Recorder {
    pub outputs: Outputs,
    trajectory: String,
    body: Sha256,
    records: u64,
    agents: String,
    events: String,
}

impl Recorder {
    pub fn new(outputs: Outputs, scenario_sha256: &str, seed: u64, ticks: u64, stride: u64) -> Self {
        let mut trajectory = String::new();
        if outputs.trajectory {
            let header = Header {
                record: "header",
                scenario_sha256,
                seed,
                ticks,
                stride,
            };
            trajectory.push_str(&serde_json::to_string(&header).expect("header serializes"));
            trajectory.push('\n');
        }
        Self {
            outputs,
            trajectory,
            body: Sha256::new(),
            records: 0,
            agents: String::new(),
            events: String::new(),
        }
    }

    fn body_line(&mut self, line: &str) {
        self.body.update(line.as_bytes());
        if self.outputs.trajectory {
            self.trajectory.push_str(line);
        }
    }

    pub fn snapshot(&mut self, env: &Environment, snapshot: &GasSnapshot) {
        self.records += snapshot.len() as u64;
        self.body_line(&snapshot.to_records());
        let mut lines = Vec::new();
        if !env.global_params.is_empty() {
            lines.push(param_line(snapshot.tick, None, &env.global_params));
        }
        for layer in env.layers() {
            if !layer.params.is_empty() {
                lines.push(param_line(snapshot.tick, Some(&layer.name), &layer.params));
            }
        }
        for line in lines {
            self.body_line(&line);
        }
    }

    pub fn agent(
        &mut self,
        tick: u64,
        id: EntityId,
        kind: &str,
        state: &AgentInternalState,
        possibility: Option<&PossibilisticState>,
        election: Option<&Election>,
    ) {
        if !self.outputs.agents {
            return;
        }
        let line = AgentLine {
            tick,
            id,
            kind,
            beliefs: &state.beliefs,
            goals: &state.goals,
            intentions: &state.intentions,
            preferences: &state.preferences,
            commitments: &state.commitments,
            plans: state.plans.values().collect(),
            history_len: state.history.len(),
            last_history: state.history.last(),
            possibility,
            election,
        };
        self.agents
            .push_str(&serde_json::to_string(&line).expect("agent records serialize"));
        self.agents.push('\n');
    }

    pub fn event(&mut self, event: &Event) {
        if self.outputs.events {
            self.events
                .push_str(&serde_json::to_string(event).expect("events serialize"));
            self.events.push('\n');
        }
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn finish(self) -> (String, String, String, String) {
        let digest = hex::encode(self.body.finalize());
        (digest, self.trajectory, self.agents, self.events)
    }
}

fn param_line(tick: u64, layer: Option<&str>, params: &ParamMap) -> String {
    let line = ParamLine {
        record: "params",
        tick,
        layer,
        params,
    };
    serde_json::to_string(&line).expect("parameter records serialize") + "\n"
}

/// End-of-run facts. Wall time is deliberately absent so summaries of
/// equal runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario_sha256: String,
    pub seed: u64,
    pub final_tick: u64,
    pub entities: usize,
    pub agents: usize,
    pub trajectory_sha256: String,
    pub trajectory_records: u64,
    /// Agent ticks lost to planning or mind failures.
    pub skipped_agent_ticks: u64,
    /// Per type, the mean of every numeric field and the true-fraction of
    /// every boolean field over the final population.
    pub means: BTreeMap<String, BTreeMap<String, f64>>,
}

pub(crate) fn field_means(env: &Environment) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, (usize, BTreeMap<String, f64>)> = BTreeMap::new();
    for e in env.entities() {
        let (n, fields) = sums.entry(e.type_name.clone()).or_default();
        *n += 1;
        for (k, v) in &e.state {
            let x = match v {
                Value::Num(x) => *x,
                Value::Bool(b) => f64::from(u8::from(*b)),
                Value::Sym(_) => continue,
            };
            *fields.entry(k.clone()).or_default() += x;
        }
    }
    sums.into_iter()
        .map(|(ty, (n, fields))| (ty, fields.into_iter().map(|(k, s)| (k, s / n as f64)).collect()))
        .collect()
}
