use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::EntityId;
use crate::percept::Percept;
use crate::rule::{Assign, Expr};
use crate::value::Value;

pub const DEFAULT_COMMITMENT_BONUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalId(pub String);

impl GoalId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }
}

impl fmt::Display for GoalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlanId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommitmentId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalKind {
    /// A permanent relationship with the environment; never discharged.
    Maintenance,
    /// Discharged once its condition holds.
    Achievement,
}

impl GoalKind {
    pub fn keyword(self) -> &'static str {
        match self {
            GoalKind::Maintenance => "maintain",
            GoalKind::Achievement => "achieve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Goal {
    pub id: GoalId,
    pub kind: GoalKind,
    #[serde(skip)]
    pub condition: Expr,
    pub active: bool,
}

impl Goal {
    pub fn new(id: &str, kind: GoalKind, condition: Expr) -> Self {
        Self {
            id: GoalId::new(id),
            kind,
            condition,
            active: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub value: Value,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commitment {
    pub id: CommitmentId,
    pub members: BTreeSet<EntityId>,
    pub goal: GoalId,
    pub origin_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub id: PlanId,
    pub goal: GoalId,
    pub steps: Vec<String>,
    pub cursor: usize,
}

impl Plan {
    pub fn next_step(&self) -> Option<&str> {
        self.steps.get(self.cursor).map(String::as_str)
    }

    pub fn is_exhausted(&self) -> bool {
        self.cursor >= self.steps.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionIntent {
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<GoalId>,
}

impl ActionIntent {
    pub fn new(action: impl Into<String>) -> Self {
        Self {
            action: action.into(),
            goal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub tick: u64,
    pub percepts: Vec<Percept>,
    pub actions: Vec<ActionIntent>,
}

/// An action an agent can perform: precondition plus effect on its own state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    pub name: String,
    pub precondition: Expr,
    pub effects: Vec<Assign>,
    /// Delay after which the agent is woken again, if any.
    pub wake: Option<Expr>,
    /// Needs a partner through an agreement function to take effect.
    pub joint: bool,
}

impl ActionSpec {
    pub fn new(name: &str, precondition: Expr, effects: Vec<Assign>) -> Self {
        Self {
            name: name.into(),
            precondition,
            effects,
            wake: None,
            joint: false,
        }
    }
}

/// A reactive rule: when the pattern matches percepts and beliefs, perform the action.
#[derive(Debug, Clone, PartialEq)]
pub struct Ability {
    pub pattern: Expr,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkillSet {
    pub abilities: Vec<Ability>,
    pub capabilities: BTreeMap<String, ActionSpec>,
}

impl SkillSet {
    pub fn capability(&self, name: &str) -> Option<&ActionSpec> {
        self.capabilities.get(name)
    }

    /// Abilities whose action is not a declared capability.
    pub fn dangling_abilities(&self) -> Vec<&Ability> {
        self.abilities
            .iter()
            .filter(|a| !self.capabilities.contains_key(&a.action))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub name: String,
    pub goals: BTreeSet<GoalId>,
}

/// The internal state of one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentInternalState {
    pub beliefs: BTreeMap<String, Belief>,
    pub goals: Vec<Goal>,
    pub intentions: Vec<GoalId>,
    pub preferences: BTreeMap<GoalId, f64>,
    pub commitments: Vec<Commitment>,
    pub plans: BTreeMap<PlanId, Plan>,
    pub history: Vec<HistoryRecord>,
    pub commitment_bonus: f64,
    #[serde(skip)]
    next_plan: u64,
}

impl Default for AgentInternalState {
    fn default() -> Self {
        Self {
            beliefs: BTreeMap::new(),
            goals: Vec::new(),
            intentions: Vec::new(),
            preferences: BTreeMap::new(),
            commitments: Vec::new(),
            plans: BTreeMap::new(),
            history: Vec::new(),
            commitment_bonus: DEFAULT_COMMITMENT_BONUS,
            next_plan: 0,
        }
    }
}

impl AgentInternalState {
    pub fn new(goals: Vec<Goal>, preferences: BTreeMap<GoalId, f64>) -> Self {
        Self {
            goals,
            preferences,
            ..Self::default()
        }
    }

    pub fn goal(&self, id: &GoalId) -> Option<&Goal> {
        self.goals.iter().find(|g| &g.id == id)
    }

    pub fn goal_mut(&mut self, id: &GoalId) -> Option<&mut Goal> {
        self.goals.iter_mut().find(|g| &g.id == id)
    }

    pub fn belief(&self, key: &str) -> Option<&Value> {
        self.beliefs.get(key).map(|b| &b.value)
    }

    pub fn last_history_tick(&self) -> Option<u64> {
        self.history.last().map(|h| h.tick)
    }

    pub fn is_committed(&self, goal: &GoalId) -> bool {
        self.commitments.iter().any(|c| &c.goal == goal)
    }

    pub fn plan_for(&self, goal: &GoalId) -> Option<&Plan> {
        self.plans.values().find(|p| &p.goal == goal)
    }

    pub fn has_pending_step(&self) -> bool {
        self.plans.values().any(|p| !p.is_exhausted())
    }

    pub fn add_plan(&mut self, goal: GoalId, steps: Vec<String>) -> PlanId {
        let id = PlanId(self.next_plan);
        self.next_plan += 1;
        self.plans.insert(
            id,
            Plan {
                id,
                goal,
                steps,
                cursor: 0,
            },
        );
        id
    }

    /// Binds the agent to a commitment and (re)activates its goal.
    /// Returns false when the goal is not one this agent declares.
    pub fn commit(&mut self, commitment: Commitment) -> bool {
        let Some(goal) = self.goal_mut(&commitment.goal) else {
            return false;
        };
        goal.active = true;
        if !self.commitments.iter().any(|c| c.id == commitment.id) {
            self.commitments.push(commitment);
        }
        true
    }

    /// Structural invariants: intentions are held goals, preferences name
    /// declared goals, plan cursors are in range, history ticks increase.
    pub fn check(&self) -> Result<(), String> {
        for i in &self.intentions {
            if !self.goals.iter().any(|g| &g.id == i && g.active) {
                return Err(format!("intention `{i}` is not an active goal"));
            }
        }
        for k in self.preferences.keys() {
            if self.goal(k).is_none() {
                return Err(format!("preference for undeclared goal `{k}`"));
            }
        }
        for p in self.plans.values() {
            if p.cursor > p.steps.len() {
                return Err(format!(
                    "plan {} cursor {} past {} steps",
                    p.id.0,
                    p.cursor,
                    p.steps.len()
                ));
            }
        }
        if self.history.windows(2).any(|w| w[0].tick >= w[1].tick) {
            return Err("history ticks do not strictly increase".into());
        }
        Ok(())
    }
}
