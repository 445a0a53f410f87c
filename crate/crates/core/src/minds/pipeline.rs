use log::warn;

use super::backend::MindBackend;
use super::memory::{MemoryRecord, MemoryStore, PlanRecord, QuerySpec};
use super::observation::{perceive_text, ObservationRecord, TemplateSet};
use super::MindError;
use crate::arm::{emit_step, ActionIntent, ArmError, Goal, Plan, PlanSource, PlanningError, SkillSet};
use crate::ids::EntityId;
use crate::percept::Percept;
use crate::rule::Scope;

pub const DEFAULT_RETRIEVE: usize = 5;

/// Per-agent mind: templates, memory, retrieval depth.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentMind {
    pub agent: EntityId,
    pub templates: TemplateSet,
    pub memory: MemoryStore,
    pub retrieve_k: usize,
}

impl AgentMind {
    pub fn new(agent: EntityId, templates: TemplateSet, memory: MemoryStore, retrieve_k: usize) -> Self {
        Self {
            agent,
            templates,
            memory,
            retrieve_k,
        }
    }

    /// Perception and memory stages: renders percepts, lets the backend
    /// rewrite the text, and stores the observation.
    pub fn observe(
        &mut self,
        backend: &mut MindBackend,
        tick: u64,
        percepts: &[Percept],
    ) -> Result<ObservationRecord, MindError> {
        let mut obs = perceive_text(self.agent, tick, percepts, &self.templates)?;
        obs.text = backend.perceive(self.agent, tick, &obs.text)?;
        self.memory.append(MemoryRecord::Observation(obs.clone()), tick);
        Ok(obs)
    }

    /// Planning stage for one goal, recording the plan in memory.
    pub fn plan(
        &mut self,
        backend: &mut MindBackend,
        tick: u64,
        goal: &Goal,
        skills: &SkillSet,
    ) -> Result<Option<Vec<String>>, MindError> {
        let query = QuerySpec::from_text(&goal.id.0.replace('_', " "));
        let memories = self.memory.retrieve(&query, self.retrieve_k, tick);
        let steps = backend.plan(self.agent, tick, goal, &memories, skills)?;
        if let Some(steps) = &steps {
            let record = PlanRecord {
                tick,
                agent: self.agent,
                goal: goal.id.clone(),
                steps: steps.clone(),
            };
            self.memory.append(MemoryRecord::Plan(record), tick);
        }
        Ok(steps)
    }
}

/// Adapts a mind and its backend to the ARM planning interface.
pub struct MindPlanner<'a> {
    pub mind: &'a mut AgentMind,
    pub backend: &'a mut MindBackend,
}

impl PlanSource for MindPlanner<'_> {
    fn synthesize(&mut self, goal: &Goal, skills: &SkillSet, tick: u64) -> Result<Option<Vec<String>>, PlanningError> {
        self.mind.plan(self.backend, tick, goal, skills).map_err(|e| {
            warn!(
                "agent {} tick {tick}: planning for `{}` failed: {e}",
                self.mind.agent, goal.id
            );
            match e {
                MindError::Planning(p) => p,
                other => PlanningError::Backend(other.to_string()),
            }
        })
    }
}

/// Action stage: the cursor step if its precondition holds, else nothing.
pub fn act(plan: &Plan, skills: &SkillSet, scope: &dyn Scope) -> Result<Vec<ActionIntent>, ArmError> {
    Ok(emit_step(plan, skills, scope)?.into_iter().collect())
}
