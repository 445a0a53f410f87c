use crate::arm::{GoalId, GoalKind};
use crate::gas::{GeoRefConvention, NeighborhoodSpec, Rule};
use crate::magi::{EntityKind, Shape};
use crate::minds::Production;
use crate::rule::{Assign, Expr};
use crate::value::{Ty, Value};

/// A parsed scenario. Items keep declaration order within each section.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioDoc {
    pub env: EnvBlock,
    pub grid: Option<GeoRefConvention>,
    pub rules: Vec<RuleDecl>,
    pub types: Vec<TypeDecl>,
    pub layers: Vec<LayerDecl>,
    pub run: RunBlock,
}

impl ScenarioDoc {
    pub fn rule(&self, name: &str) -> Option<&RuleDecl> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn type_decl(&self, name: &str) -> Option<&TypeDecl> {
        self.types.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvBlock {
    pub params: Vec<(String, Value)>,
    pub functions: Vec<Assign>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleDecl {
    pub name: String,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldAst {
    pub name: String,
    pub ty: Ty,
    pub default: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDecl {
    pub name: String,
    pub joint: bool,
    pub precondition: Expr,
    pub effects: Vec<Assign>,
    pub wake: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerceptionDecl {
    Entities { radius: f64, filter: Option<Expr> },
    Param(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalDecl {
    pub id: GoalId,
    pub kind: GoalKind,
    pub condition: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanDecl {
    pub name: String,
    pub goal: GoalId,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleDecl {
    pub name: String,
    pub goals: Vec<GoalId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendDecl {
    RuleBased,
    Scripted(String),
    External { command: String, perceive: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MindDecl {
    pub backend: Option<BackendDecl>,
    pub memory: Option<u64>,
    pub retrieve: Option<u64>,
    /// recency weight, keyword weight, decay
    pub weights: Option<(f64, f64, f64)>,
    pub productions: Vec<Production>,
    pub templates: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldDecl {
    pub name: String,
    pub pi: f64,
    pub facts: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoDecl {
    pub name: String,
    pub worlds: Vec<String>,
    pub when: Expr,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PossibilisticDecl {
    pub worlds: Vec<WorldDecl>,
    pub desires: Vec<(GoalId, Expr)>,
    pub infos: Vec<InfoDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbilityDecl {
    pub action: String,
    pub pattern: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementDecl {
    pub action: String,
    pub goal: GoalId,
    pub within: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub kind: EntityKind,
    pub fields: Vec<FieldAst>,
    pub shapes: Vec<Shape>,
    pub neighborhood: Option<NeighborhoodSpec>,
    pub transition: Option<String>,
    pub movement: Option<String>,
    pub neighbors: Option<String>,
    pub perception: Vec<PerceptionDecl>,
    pub actions: Vec<ActionDecl>,
    pub decisions: Vec<(String, Expr)>,
    pub abilities: Vec<AbilityDecl>,
    pub agreements: Vec<AgreementDecl>,
    pub goals: Vec<GoalDecl>,
    pub preferences: Vec<(GoalId, f64)>,
    pub plans: Vec<PlanDecl>,
    pub roles: Vec<RoleDecl>,
    pub use_cases: Vec<String>,
    pub activation: Option<Expr>,
    pub intentions: Option<u64>,
    pub commitment_bonus: Option<f64>,
    pub mind: Option<MindDecl>,
    pub possibilistic: Option<PossibilisticDecl>,
}

impl TypeDecl {
    pub fn new(name: &str, kind: EntityKind) -> Self {
        Self {
            name: name.into(),
            kind,
            fields: Vec::new(),
            shapes: Vec::new(),
            neighborhood: None,
            transition: None,
            movement: None,
            neighbors: None,
            perception: Vec::new(),
            actions: Vec::new(),
            decisions: Vec::new(),
            abilities: Vec::new(),
            agreements: Vec::new(),
            goals: Vec::new(),
            preferences: Vec::new(),
            plans: Vec::new(),
            roles: Vec::new(),
            use_cases: Vec::new(),
            activation: None,
            intentions: None,
            commitment_bonus: None,
            mind: None,
            possibilistic: None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldAst> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionDecl> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn goal(&self, id: &GoalId) -> Option<&GoalDecl> {
        self.goals.iter().find(|g| &g.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placing {
    /// Distinct unoccupied lattice cells.
    Vacant,
    /// Uniform positions; collisions allowed.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    Entity {
        ty: String,
        x: f64,
        y: f64,
        shape: Option<Shape>,
        state: Vec<Assign>,
    },
    Populate {
        count: u64,
        ty: String,
        placing: Placing,
        state: Vec<Assign>,
    },
    /// One entity on every lattice cell, row-major.
    Fill { ty: String, state: Vec<Assign> },
}

impl Placement {
    pub fn type_name(&self) -> &str {
        match self {
            Placement::Entity { ty, .. } | Placement::Populate { ty, .. } | Placement::Fill { ty, .. } => ty,
        }
    }

    pub fn state(&self) -> &[Assign] {
        match self {
            Placement::Entity { state, .. } | Placement::Populate { state, .. } | Placement::Fill { state, .. } => {
                state
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerDecl {
    pub name: String,
    pub params: Vec<(String, Value)>,
    pub functions: Vec<Assign>,
    pub placements: Vec<Placement>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunBlock {
    pub seed: Option<u64>,
    pub ticks: Option<u64>,
    pub stride: Option<u64>,
    pub outputs: Vec<String>,
}
