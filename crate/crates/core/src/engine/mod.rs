//! Runs compiled scenarios.
//!
//! Each GAS tick is a recurring integer-time event. Within a tick the phase
//! order is fixed: agents perceive the committed world, update beliefs,
//! refresh and elect goals, activate, decide and plan (through their mind
//! when they have one); joint proposals are paired into commitments;
//! accepted actions are applied; every automaton then takes one
//! synchronous GAS step, and parameter functions run last. Agents may
//! schedule wake-up events between ticks; a wake addresses the agent at
//! its next activation.

mod record;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Duration;

use log::{debug, warn};
use thiserror::Error;

pub use record::{Outputs, Summary};

use record::{field_means, sha256_hex, Recorder};

use crate::arm::{
    activate, elect_goals, goal_conditions, plan_and_execute, record_history, refresh_goals, revise_possibility,
    select_intentions, update_beliefs, ActionIntent, Activation, ActivationEvent, AgentInternalState, ArmError,
    Election, GoalId, PlanningError, PossibilisticError, PossibilisticState,
};
use crate::devs::{DevsError, Payload, Scheduler, Target};
use crate::dsl::{compile_with_seed, parse, CompileError, CompiledScenario, ParseError, RunSettings, ValidationReport};
use crate::gas::{self, StepError};
use crate::ids::EntityId;
use crate::magi::{act, agree, apply_global_functions, decide, perceive, AgentScope, Environment, MagiError};
use crate::minds::{
    exchanges_to_jsonl, AgentMind, BackendSpec, ExternalBackend, MemoryStore, MindBackend, MindPlanner,
    ProcessTransport, Transcript, Transport, DEFAULT_TIMEOUT,
};
use crate::percept::Percept;
use crate::rng::SeedStreams;
use crate::rule::{eval_bool, EvalError};

const TICK_PRIORITY: i32 = 0;
/// Wakes at a tick's time are handled before the tick itself.
const WAKE_PRIORITY: i32 = -1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{} parse error(s)", .0.len())]
    Parse(Vec<ParseError>),
    #[error("scenario does not validate")]
    Invalid(ValidationReport),
    #[error("internal compilation failure: {0}")]
    Compile(String),
    #[error("mind backend for `{ty}`: {reason}")]
    MindSetup { ty: String, reason: String },
    #[error(transparent)]
    Magi(#[from] MagiError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Devs(#[from] DevsError),
    #[error("agent {agent} at tick {tick}: {source}")]
    Agent {
        agent: EntityId,
        tick: u64,
        source: ArmError,
    },
    #[error("agent {agent} at tick {tick}: {context}: {source}")]
    Eval {
        agent: EntityId,
        tick: u64,
        context: String,
        source: EvalError,
    },
    #[error("agent {agent} at tick {tick}: {source}")]
    Possibilistic {
        agent: EntityId,
        tick: u64,
        source: PossibilisticError,
    },
}

impl EngineError {
    /// Errors in the scenario text itself, as opposed to failures while running.
    pub fn is_input_error(&self) -> bool {
        matches!(self, EngineError::Parse(_) | EngineError::Invalid(_))
    }
}

impl From<CompileError> for EngineError {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Invalid(r) => EngineError::Invalid(r),
            CompileError::Internal(m) => EngineError::Compile(m),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub ticks: Option<u64>,
    pub stride: Option<u64>,
    /// Directory that scripted transcript paths are relative to.
    pub base_dir: PathBuf,
    /// Replaces the planning command of every external backend.
    pub mind_command: Option<String>,
    pub mind_timeout: Duration,
    /// Overrides the run block's output list.
    pub outputs: Option<Outputs>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: None,
            ticks: None,
            stride: None,
            base_dir: PathBuf::from("."),
            mind_command: None,
            mind_timeout: DEFAULT_TIMEOUT,
            outputs: None,
        }
    }
}

/// Everything a finished run produced. Streams not requested are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: Summary,
    pub trajectory: Option<String>,
    pub agents: Option<String>,
    pub events: Option<String>,
    pub transcript: Option<String>,
    pub write_summary: bool,
}

impl RunOutput {
    /// (file name, contents) for every requested stream.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(t) = &self.trajectory {
            out.push(("trajectory.jsonl", t.clone()));
        }
        if let Some(a) = &self.agents {
            out.push(("agents.jsonl", a.clone()));
        }
        if let Some(e) = &self.events {
            out.push(("events.jsonl", e.clone()));
        }
        if let Some(t) = &self.transcript {
            out.push(("transcript.jsonl", t.clone()));
        }
        if self.write_summary {
            let text = serde_json::to_string_pretty(&self.summary).expect("summary serializes") + "\n";
            out.push(("summary.json", text));
        }
        out
    }
}

struct Prepared {
    percepts: Vec<Percept>,
    conditions: BTreeMap<GoalId, bool>,
    run: bool,
}

pub struct Simulation {
    env: Environment,
    settings: RunSettings,
    streams: SeedStreams,
    scheduler: Scheduler,
    scenario_sha256: String,
    tick: u64,
    minds: BTreeMap<EntityId, AgentMind>,
    backends: BTreeMap<String, MindBackend>,
    possibility: BTreeMap<EntityId, PossibilisticState>,
    elections: BTreeMap<EntityId, Election>,
    addressed: BTreeSet<EntityId>,
    next_commitment: u64,
    skipped: u64,
    recorder: Recorder,
}

impl Simulation {
    /// Parses, validates and compiles `source`, then applies option overrides.
    pub fn from_source(source: &str, options: &RunOptions) -> Result<Self, EngineError> {
        let doc = parse(source).map_err(EngineError::Parse)?;
        let seed = options.seed.or(doc.run.seed).unwrap_or(0);
        let compiled = compile_with_seed(&doc, seed)?;
        Self::new(compiled, sha256_hex(source.as_bytes()), options)
    }

    pub fn new(compiled: CompiledScenario, scenario_sha256: String, options: &RunOptions) -> Result<Self, EngineError> {
        let CompiledScenario { env, mut run } = compiled;
        if let Some(t) = options.ticks {
            run.ticks = t;
        }
        if let Some(s) = options.stride {
            run.stride = s.max(1);
        }
        let outputs = options.outputs.unwrap_or_else(|| Outputs::from_names(&run.outputs));
        let mut backends = BTreeMap::new();
        let mut minds = BTreeMap::new();
        for (name, tau) in &env.types {
            if let Some(spec) = &tau.mind {
                backends.insert(name.clone(), build_backend(name, &spec.backend, options)?);
            }
        }
        for id in env.agent_ids() {
            let e = env.entity(id).expect("listed agent");
            if let Some(spec) = env.tau(&e.type_name).and_then(|t| t.mind.as_ref()) {
                let memory = MemoryStore::new(spec.capacity, spec.weights);
                minds.insert(id, AgentMind::new(id, spec.template_set(), memory, spec.retrieve));
            }
        }
        let mut scheduler = Scheduler::new();
        if run.ticks > 0 {
            scheduler.schedule(0.0, TICK_PRIORITY, Target::Global, Payload::Tick { tick: 0 })?;
        }
        let recorder = Recorder::new(outputs, &scenario_sha256, run.seed, run.ticks, run.stride);
        Ok(Self {
            streams: SeedStreams::new(run.seed),
            env,
            settings: run,
            scheduler,
            scenario_sha256,
            tick: 0,
            minds,
            backends,
            possibility: BTreeMap::new(),
            elections: BTreeMap::new(),
            addressed: BTreeSet::new(),
            next_commitment: 0,
            skipped: 0,
            recorder,
        })
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn settings(&self) -> &RunSettings {
        &self.settings
    }

    /// Completed ticks.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.settings.ticks
    }

    pub fn election(&self, agent: EntityId) -> Option<&Election> {
        self.elections.get(&agent)
    }

    /// Handles events up to and including the next tick. Returns false when
    /// the run is already over.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        if self.is_finished() {
            return Ok(false);
        }
        while let Some(event) = self.scheduler.pop() {
            self.recorder.event(&event);
            match (&event.payload, &event.target) {
                (Payload::Tick { tick }, _) => {
                    self.run_tick(*tick)?;
                    return Ok(true);
                }
                (Payload::Wake { .. }, Target::Agent(id)) => {
                    self.addressed.insert(*id);
                }
                _ => {}
            }
        }
        Ok(false)
    }

    pub fn run(mut self) -> Result<RunOutput, EngineError> {
        while self.step()? {}
        Ok(self.finish())
    }

    pub fn finish(self) -> RunOutput {
        let outputs = self.recorder.outputs;
        let records = self.recorder.records();
        let transcript = outputs.transcript.then(|| {
            self.backends
                .values()
                .map(|b| exchanges_to_jsonl(b.exchanges()))
                .collect::<String>()
        });
        let summary = Summary {
            scenario_sha256: self.scenario_sha256,
            seed: self.settings.seed,
            final_tick: self.tick,
            entities: self.env.len(),
            agents: self.env.agent_ids().len(),
            trajectory_sha256: String::new(),
            trajectory_records: records,
            skipped_agent_ticks: self.skipped,
            means: field_means(&self.env),
        };
        let (digest, trajectory, agents, events) = self.recorder.finish();
        RunOutput {
            summary: Summary {
                trajectory_sha256: digest,
                ..summary
            },
            trajectory: outputs.trajectory.then_some(trajectory),
            agents: outputs.agents.then_some(agents),
            events: outputs.events.then_some(events),
            transcript,
            write_summary: outputs.summary,
        }
    }

    fn run_tick(&mut self, t: u64) -> Result<(), EngineError> {
        let streams = self.streams;
        let mut percepts: BTreeMap<EntityId, Vec<Percept>> = BTreeMap::new();
        let mut ran = BTreeSet::new();
        let mut proposals: Vec<(EntityId, ActionIntent)> = Vec::new();
        for a in self.env.agent_ids() {
            let prepared = self.prepare_agent(a, t)?;
            if prepared.run {
                ran.insert(a);
                let intents = self.plan_agent(a, t, &prepared)?;
                proposals.extend(intents.into_iter().map(|i| (a, i)));
            }
            percepts.insert(a, prepared.percepts);
        }

        let agreed = agree(&self.env, &proposals, t, self.next_commitment)?;
        self.next_commitment += agreed.commitments.len() as u64;
        for c in &agreed.commitments {
            for m in &c.members {
                let bound = self.internal_mut(*m).commit(c.clone());
                if !bound {
                    warn!("agent {m} tick {t}: commitment to undeclared goal `{}` ignored", c.goal);
                }
            }
        }
        let mut accepted: BTreeMap<EntityId, Vec<ActionIntent>> = BTreeMap::new();
        for (who, intent) in agreed.accepted {
            accepted.entry(who).or_default().push(intent);
        }

        let mut outcomes = Vec::new();
        for (who, intents) in &accepted {
            outcomes.push((*who, act(&self.env, *who, intents, &percepts[who], t, streams)?));
        }
        for (who, outcome) in outcomes {
            for (action, delay) in outcome.wakes {
                self.scheduler.schedule(
                    t as f64 + delay,
                    WAKE_PRIORITY,
                    Target::Agent(who),
                    Payload::Wake { action },
                )?;
            }
            self.env.entity_mut(who).expect("acting agent exists").state = outcome.state;
        }
        for a in ran {
            let actions = accepted.remove(&a).unwrap_or_default();
            let seen = percepts.remove(&a).unwrap_or_default();
            let state = self.internal_mut(a);
            *state = record_history(state, seen, actions, t).map_err(|source| EngineError::Agent {
                agent: a,
                tick: t,
                source,
            })?;
        }

        let snapshot = self.env.gas_snapshot(t);
        let next = gas::step(&self.env.model, &snapshot, streams, &self.env)?;
        self.env.commit_snapshot(&next)?;
        apply_global_functions(&mut self.env, t, streams)?;
        self.tick = t + 1;
        if self.tick.is_multiple_of(self.settings.stride) {
            self.sample(&next);
        }
        if self.tick < self.settings.ticks {
            self.scheduler.schedule(
                self.tick as f64,
                TICK_PRIORITY,
                Target::Global,
                Payload::Tick { tick: self.tick },
            )?;
        }
        debug!("tick {} done", self.tick);
        Ok(())
    }

    fn sample(&mut self, snapshot: &gas::GasSnapshot) {
        self.recorder.snapshot(&self.env, snapshot);
        if self.recorder.outputs.agents {
            for a in self.env.agent_ids() {
                let e = self.env.entity(a).expect("listed agent");
                let Some(state) = &e.internal else { continue };
                self.recorder.agent(
                    self.tick,
                    a,
                    &e.type_name,
                    state,
                    self.possibility.get(&a),
                    self.elections.get(&a),
                );
            }
        }
    }

    fn internal_mut(&mut self, a: EntityId) -> &mut AgentInternalState {
        self.env
            .entity_mut(a)
            .and_then(|e| e.internal.as_mut())
            .expect("agents carry an internal state")
    }

    /// Perception, belief update, goal refresh, possibilistic election,
    /// activation and intention selection. Writes the internal state back.
    fn prepare_agent(&mut self, a: EntityId, t: u64) -> Result<Prepared, EngineError> {
        let streams = self.streams;
        let env = &self.env;
        let who = env.entity(a).ok_or(MagiError::UnknownEntity(a))?;
        let tau = env
            .tau(&who.type_name)
            .ok_or_else(|| MagiError::UnknownType(who.type_name.clone()))?;
        let eval_err = |context: &str| {
            let context = context.to_string();
            move |source| EngineError::Eval {
                agent: a,
                tick: t,
                context,
                source,
            }
        };

        let percepts = if tau.perception.is_empty() {
            Vec::new()
        } else {
            perceive(env, a, t, streams)?
        };
        let mut internal = update_beliefs(who.internal.as_ref().expect("agent"), &percepts, t);
        let (conditions, trigger) = {
            let scope = AgentScope::new(env, who, &percepts, t, streams, "G").with_internal(&internal);
            let conditions = goal_conditions(&internal, &scope).map_err(eval_err("goal condition"))?;
            let trigger = match &tau.activation {
                Some(expr) => eval_bool(expr, &scope).map_err(eval_err("activation"))?,
                None => tau.default_trigger(),
            };
            (conditions, trigger)
        };
        internal = refresh_goals(&internal, &conditions);

        let mut elected = None;
        if let Some(spec) = &tau.possibilistic {
            let mut ps = self.possibility.get(&a).cloned().unwrap_or_else(|| spec.state.clone());
            for (info, when) in &spec.infos {
                let scope = AgentScope::new(env, who, &percepts, t, streams, "G").with_internal(&internal);
                if !eval_bool(when, &scope).map_err(eval_err(&format!("information `{}`", info.name)))? {
                    continue;
                }
                match revise_possibility(&ps, info) {
                    Ok(next) => ps = next,
                    Err(e) => warn!("agent {a} tick {t}: {e}"),
                }
            }
            let candidates: BTreeSet<GoalId> = internal
                .goals
                .iter()
                .filter(|g| g.active)
                .map(|g| g.id.clone())
                .collect();
            let scope = AgentScope::new(env, who, &percepts, t, streams, "G").with_internal(&internal);
            let election = elect_goals(
                &ps,
                &candidates,
                |rule| eval_bool(&rule.guard, &scope),
                |goal, world| {
                    let g = internal.goal(goal).expect("candidate goals are declared");
                    let in_world = AgentScope::new(env, who, &percepts, t, streams, "G")
                        .with_internal(&internal)
                        .with_facts(&world.facts);
                    eval_bool(&g.condition, &in_world)
                },
            )
            .map_err(|source| EngineError::Possibilistic {
                agent: a,
                tick: t,
                source,
            })?;
            elected = Some(election.elected.clone());
            self.possibility.insert(a, ps);
            self.elections.insert(a, election);
        }

        let event = ActivationEvent {
            tick: t,
            addressed: self.addressed.remove(&a),
            trigger,
            conditions: conditions.clone(),
        };
        let run = activate(&internal, &event) == Activation::Run;
        if run {
            let k = tau.max_intentions;
            internal.intentions = match &elected {
                Some(set) => {
                    let mut masked = internal.clone();
                    for g in &mut masked.goals {
                        g.active &= set.contains(&g.id);
                    }
                    select_intentions(&masked, k)
                }
                None => select_intentions(&internal, k),
            };
        }
        *self.internal_mut(a) = internal;
        Ok(Prepared {
            percepts,
            conditions,
            run,
        })
    }

    /// Decision functions, then plan steps from the mind or plan library.
    /// A planning failure costs the agent every action this tick.
    fn plan_agent(&mut self, a: EntityId, t: u64, prepared: &Prepared) -> Result<Vec<ActionIntent>, EngineError> {
        let streams = self.streams;
        let env = &self.env;
        let who = env.entity(a).ok_or(MagiError::UnknownEntity(a))?;
        let tau = env
            .tau(&who.type_name)
            .ok_or_else(|| MagiError::UnknownType(who.type_name.clone()))?;
        let internal = who.internal.as_ref().expect("agent");
        let mut intents = decide(env, a, &prepared.percepts, t, streams)?;
        let scope = AgentScope::new(env, who, &prepared.percepts, t, streams, "D");
        let planned = match self.minds.get_mut(&a) {
            Some(mind) => {
                let backend = self
                    .backends
                    .get_mut(&who.type_name)
                    .expect("typed minds have a backend");
                match mind.observe(backend, t, &prepared.percepts) {
                    Ok(_) => {
                        let mut planner = MindPlanner { mind, backend };
                        plan_and_execute(internal, &tau.skills, &scope, &mut planner, &prepared.conditions, t)
                    }
                    Err(e) => Err(ArmError::Planning(PlanningError::Backend(e.to_string()))),
                }
            }
            None => {
                let mut library = tau.plans.clone();
                plan_and_execute(internal, &tau.skills, &scope, &mut library, &prepared.conditions, t)
            }
        };
        match planned {
            Ok((next, steps)) => {
                for step in steps {
                    if !intents.iter().any(|i| i.action == step.action) {
                        intents.push(step);
                    }
                }
                *self.internal_mut(a) = next;
                Ok(intents)
            }
            Err(ArmError::Planning(e)) => {
                warn!("agent {a} tick {t}: {e}; skipping its actions");
                self.skipped += 1;
                Ok(Vec::new())
            }
            Err(source) => Err(EngineError::Agent {
                agent: a,
                tick: t,
                source,
            }),
        }
    }
}

fn build_backend(ty: &str, spec: &BackendSpec, options: &RunOptions) -> Result<MindBackend, EngineError> {
    let setup = |reason: String| EngineError::MindSetup {
        ty: ty.to_string(),
        reason,
    };
    Ok(match spec {
        BackendSpec::RuleBased(rules) => MindBackend::RuleBased(rules.clone()),
        BackendSpec::Scripted { path } => {
            let full = options.base_dir.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| setup(format!("{}: {e}", full.display())))?;
            MindBackend::Scripted(Transcript::from_jsonl(&text).map_err(setup)?)
        }
        BackendSpec::External { command, perceive } => {
            let command = options.mind_command.as_deref().unwrap_or(command);
            let spawn = |cmd: &str| -> Result<Box<dyn Transport>, EngineError> {
                let t = ProcessTransport::spawn(cmd, options.mind_timeout).map_err(|e| setup(e.to_string()))?;
                Ok(Box::new(t))
            };
            let perceive = perceive.as_deref().map(spawn).transpose()?;
            MindBackend::External(ExternalBackend::new(spawn(command)?, perceive))
        }
    })
}
