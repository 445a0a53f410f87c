use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::georef::{GeoError, GeoRefConvention, Location, NeighborhoodSpec};
use crate::ids::EntityId;
use crate::rule::{Assign, Attr, BinOp, Expr, MoveExpr, NeighborExpr};
use crate::value::{StateValue, Ty, Value};

pub const IDENTITY_TRANSITION: &str = "identity";
pub const STAY_MOVEMENT: &str = "stay";
pub const STATIC_NEIGHBORHOOD: &str = "static";

static BUILTIN_TRANSITION: Rule = Rule::Transition(Vec::new());
static BUILTIN_MOVEMENT: Rule = Rule::Movement(MoveExpr::Stay);
static BUILTIN_NEIGHBORHOOD: Rule = Rule::Neighborhood(NeighborExpr::Static);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub ty: Ty,
    pub default: Value,
}

/// Declared state space (S) of one automaton type.
pub type StateSchema = BTreeMap<String, FieldDecl>;

/// One of the three rule maps' entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    /// T_s: simultaneous field assignments, all read from the pre-step state.
    Transition(Vec<Assign>),
    /// M_L
    Movement(MoveExpr),
    /// R_N
    Neighborhood(NeighborExpr),
}

impl Rule {
    pub fn kind(&self) -> &'static str {
        match self {
            Rule::Transition(_) => "transition",
            Rule::Movement(_) => "movement",
            Rule::Neighborhood(_) => "neighborhood",
        }
    }

    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        match self {
            Rule::Transition(assigns) => out.extend(assigns.iter().map(|a| &a.value)),
            Rule::Movement(m) => m.exprs(&mut out),
            Rule::Neighborhood(n) => n.exprs(&mut out),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomatonType {
    pub schema: StateSchema,
    pub transition: String,
    pub movement: String,
    pub neighborhood: String,
    pub neighborhood_spec: NeighborhoodSpec,
}

impl AutomatonType {
    /// A type whose three rule maps are all the identity.
    pub fn identity(schema: StateSchema, neighborhood_spec: NeighborhoodSpec) -> Self {
        Self {
            schema,
            transition: IDENTITY_TRANSITION.into(),
            movement: STAY_MOVEMENT.into(),
            neighborhood: STATIC_NEIGHBORHOOD.into(),
            neighborhood_spec,
        }
    }

    pub fn default_state(&self) -> StateValue {
        self.schema
            .iter()
            .map(|(k, f)| (k.clone(), f.default.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("type `{ty}` references unknown {kind} rule `{rule}`")]
    UnknownRule {
        ty: String,
        kind: &'static str,
        rule: String,
    },
    #[error("type `{ty}` uses `{rule}` as a {expected} rule but it is a {found} rule")]
    WrongRuleKind {
        ty: String,
        rule: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("rule `{rule}` references automaton type `{ty}` which is not in K")]
    UnknownType { rule: String, ty: String },
    #[error("duplicate automaton id {0}")]
    DuplicateId(EntityId),
    #[error("automaton {id} has undeclared type `{ty}`")]
    UndeclaredType { id: EntityId, ty: String },
    #[error("automaton {id}: {source}")]
    Location { id: EntityId, source: GeoError },
    #[error("automaton {0} lists itself as a neighbor")]
    SelfNeighbor(EntityId),
    #[error("automaton {id} has dangling neighbor {neighbor}")]
    DanglingNeighbor { id: EntityId, neighbor: EntityId },
}

/// A Geographic Automata System: types (K), state schemas (S), transition
/// rules (T_s), georeferencing (L), movement rules (M_L), neighborhood
/// specifications (N) and neighborhood rules (R_N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasModel {
    pub types: BTreeMap<String, AutomatonType>,
    pub rules: BTreeMap<String, Rule>,
    pub georef: GeoRefConvention,
}

impl GasModel {
    pub fn new(georef: GeoRefConvention) -> Self {
        Self {
            types: BTreeMap::new(),
            rules: BTreeMap::new(),
            georef,
        }
    }

    /// Looks up a rule by name; the built-in identity rules are always
    /// available unless shadowed.
    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.get(name).or(match name {
            IDENTITY_TRANSITION => Some(&BUILTIN_TRANSITION),
            STAY_MOVEMENT => Some(&BUILTIN_MOVEMENT),
            STATIC_NEIGHBORHOOD => Some(&BUILTIN_NEIGHBORHOOD),
            _ => None,
        })
    }

    pub fn check(&self) -> Result<(), ModelError> {
        self.georef.validate()?;
        for (ty, at) in &self.types {
            for (name, expected) in [
                (&at.transition, "transition"),
                (&at.movement, "movement"),
                (&at.neighborhood, "neighborhood"),
            ] {
                let rule = self.rule(name).ok_or_else(|| ModelError::UnknownRule {
                    ty: ty.clone(),
                    kind: expected,
                    rule: name.clone(),
                })?;
                if rule.kind() != expected {
                    return Err(ModelError::WrongRuleKind {
                        ty: ty.clone(),
                        rule: name.clone(),
                        expected,
                        found: rule.kind(),
                    });
                }
            }
        }
        for (name, rule) in &self.rules {
            for e in rule.exprs() {
                for ty in referenced_types(e) {
                    if !self.types.contains_key(&ty) {
                        return Err(ModelError::UnknownType { rule: name.clone(), ty });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Type names compared against `self.type` or `other.type` in an expression.
pub fn referenced_types(expr: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    expr.walk(&mut |e| {
        if let Expr::Binary(BinOp::Eq | BinOp::Ne, a, b) = e {
            for (x, y) in [(a, b), (b, a)] {
                let is_type = matches!(**x, Expr::SelfAttr(Attr::Type) | Expr::OtherAttr(Attr::Type));
                if let (true, Expr::Lit(Value::Sym(s))) = (is_type, &**y) {
                    out.push(s.clone());
                }
            }
        }
    });
    out
}

/// One automaton: its state (S_t), location (L_t) and neighborhood (N_t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomatonRecord {
    pub id: EntityId,
    #[serde(rename = "type")]
    pub kind: String,
    pub state: StateValue,
    pub location: Location,
    pub neighborhood: BTreeSet<EntityId>,
}

#[derive(Serialize)]
struct SnapshotLine<'a> {
    tick: u64,
    id: EntityId,
    #[serde(rename = "type")]
    kind: &'a str,
    state: &'a StateValue,
    location: Location,
    neighborhood: &'a BTreeSet<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GasSnapshot {
    pub tick: u64,
    pub automata: Vec<AutomatonRecord>,
}

impl GasSnapshot {
    pub fn new(tick: u64, automata: Vec<AutomatonRecord>) -> Self {
        Self { tick, automata }
    }

    pub fn get(&self, id: EntityId) -> Option<&AutomatonRecord> {
        self.automata.iter().find(|a| a.id == id)
    }

    pub fn len(&self) -> usize {
        self.automata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.automata.is_empty()
    }

    /// Same automata, sorted by id.
    pub fn canonical(&self) -> GasSnapshot {
        let mut automata = self.automata.clone();
        automata.sort_by_key(|a| a.id);
        GasSnapshot {
            tick: self.tick,
            automata,
        }
    }

    pub fn check(&self, model: &GasModel) -> Result<(), ModelError> {
        let mut ids = BTreeSet::new();
        for a in &self.automata {
            if !ids.insert(a.id) {
                return Err(ModelError::DuplicateId(a.id));
            }
        }
        for a in &self.automata {
            if !model.types.contains_key(&a.kind) {
                return Err(ModelError::UndeclaredType {
                    id: a.id,
                    ty: a.kind.clone(),
                });
            }
            model
                .georef
                .check(&a.location)
                .map_err(|source| ModelError::Location { id: a.id, source })?;
            if a.neighborhood.contains(&a.id) {
                return Err(ModelError::SelfNeighbor(a.id));
            }
            if let Some(n) = a.neighborhood.iter().find(|n| !ids.contains(n)) {
                return Err(ModelError::DanglingNeighbor { id: a.id, neighbor: *n });
            }
        }
        Ok(())
    }

    /// One JSON record per automaton, in id order, with the stable field
    /// order `tick, id, type, state, location, neighborhood`.
    pub fn write_records(&self, out: &mut String) {
        let mut sorted: Vec<&AutomatonRecord> = self.automata.iter().collect();
        sorted.sort_by_key(|a| a.id);
        for a in sorted {
            let line = SnapshotLine {
                tick: self.tick,
                id: a.id,
                kind: &a.kind,
                state: &a.state,
                location: a.location,
                neighborhood: &a.neighborhood,
            };
            out.push_str(&serde_json::to_string(&line).expect("snapshot records serialize"));
            out.push('\n');
        }
    }

    pub fn to_records(&self) -> String {
        let mut s = String::new();
        self.write_records(&mut s);
        s
    }
}
