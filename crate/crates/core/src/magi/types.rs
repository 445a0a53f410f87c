use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arm::{
    AgentInternalState, DesireRule, Goal, GoalId, InfoRecord, PlanLibrary, PossibilisticState, RoleSpec, SkillSet,
    DEFAULT_COMMITMENT_BONUS,
};
use crate::minds::MindSpec;
use crate::rule::Expr;

/// Admissible body shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Point,
    Disc { radius: f64 },
    Box { width: f64, height: f64 },
}

impl Shape {
    /// How far the body reaches from its location, for perception.
    pub fn extent(&self) -> f64 {
        match self {
            Shape::Point => 0.0,
            Shape::Disc { radius } => *radius,
            Shape::Box { width, height } => width.max(*height) / 2.0,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Point => f.write_str("point"),
            Shape::Disc { radius } => write!(f, "disc {radius}"),
            Shape::Box { width, height } => write!(f, "box {width} {height}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Object,
    Agent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerceptionFn {
    /// Entities within `radius` (plus both bodies' extents) satisfying `filter`.
    Entities {
        radius: f64,
        filter: Option<Expr>,
    },
    Param(String),
}

/// `choose ACTION when CONDITION`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionFn {
    pub action: String,
    pub when: Expr,
}

/// Pairs two proposers of the joint `action` within `within` distance into a
/// commitment on `goal`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementFn {
    pub action: String,
    pub goal: GoalId,
    pub within: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PossibilisticSpec {
    pub state: PossibilisticState,
    /// Information applied whenever its condition holds, in declaration order.
    pub infos: Vec<(InfoRecord, Expr)>,
}

impl PossibilisticSpec {
    pub fn desires(&self) -> &[DesireRule] {
        &self.state.desire_rules
    }
}

/// An entity type τ: body shapes, actions, perception, decision and
/// agreement functions, plus the agent's reference-model declarations.
/// Its state space and rule maps live in the GAS model under the same name.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTypeTau {
    pub name: String,
    pub kind: EntityKind,
    pub shapes: Vec<Shape>,
    pub skills: SkillSet,
    pub perception: Vec<PerceptionFn>,
    pub decisions: Vec<DecisionFn>,
    pub agreements: Vec<AgreementFn>,
    pub goals: Vec<Goal>,
    pub preferences: BTreeMap<GoalId, f64>,
    pub roles: Vec<RoleSpec>,
    pub use_cases: Vec<String>,
    pub plans: PlanLibrary,
    pub possibilistic: Option<PossibilisticSpec>,
    pub activation: Option<Expr>,
    pub max_intentions: usize,
    pub commitment_bonus: f64,
    pub mind: Option<MindSpec>,
}

impl AgentTypeTau {
    pub fn new(name: &str, kind: EntityKind) -> Self {
        Self {
            name: name.into(),
            kind,
            shapes: vec![Shape::Point],
            skills: SkillSet::default(),
            perception: Vec::new(),
            decisions: Vec::new(),
            agreements: Vec::new(),
            goals: Vec::new(),
            preferences: BTreeMap::new(),
            roles: Vec::new(),
            use_cases: Vec::new(),
            plans: PlanLibrary::default(),
            possibilistic: None,
            activation: None,
            max_intentions: 1,
            commitment_bonus: DEFAULT_COMMITMENT_BONUS,
            mind: None,
        }
    }

    pub fn admits(&self, shape: &Shape) -> bool {
        self.shapes.contains(shape)
    }

    pub fn is_joint(&self, action: &str) -> bool {
        self.skills.capability(action).is_some_and(|a| a.joint)
    }

    pub fn agreement_for(&self, action: &str) -> Option<&AgreementFn> {
        self.agreements.iter().find(|a| a.action == action)
    }

    pub fn initial_state(&self) -> AgentInternalState {
        let mut s = AgentInternalState::new(self.goals.clone(), self.preferences.clone());
        s.commitment_bonus = self.commitment_bonus;
        s
    }

    /// Explicit activation trigger, or the default: agents with decision
    /// functions run every tick.
    pub fn default_trigger(&self) -> bool {
        self.activation.is_none() && !self.decisions.is_empty()
    }
}
