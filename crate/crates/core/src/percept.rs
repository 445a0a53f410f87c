//! What an agent receives from its perception functions in one tick.

use serde::{Deserialize, Serialize};

use crate::gas::Location;
use crate::ids::EntityId;
use crate::value::{StateValue, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "percept", rename_all = "lowercase")]
pub enum Percept {
    /// Another entity within range.
    Entity {
        source: EntityId,
        #[serde(rename = "type")]
        kind: String,
        distance: f64,
        location: Location,
        state: StateValue,
    },
    /// A layer-local or global parameter.
    Param { name: String, value: Value },
}

impl Percept {
    /// Template key: the entity's type name, or `param`.
    pub fn template_kind(&self) -> &str {
        match self {
            Percept::Entity { kind, .. } => kind,
            Percept::Param { .. } => "param",
        }
    }

    /// Belief entries this percept asserts. Entity percepts yield
    /// `<id>.<field>`, `<id>.type` and `<id>.distance`; parameters their name.
    pub fn belief_entries(&self) -> Vec<(String, Value)> {
        match self {
            Percept::Entity {
                source,
                kind,
                distance,
                state,
                ..
            } => {
                let mut out: Vec<(String, Value)> = state
                    .iter()
                    .map(|(k, v)| (format!("{source}.{k}"), v.clone()))
                    .collect();
                out.push((format!("{source}.type"), Value::sym(kind.clone())));
                out.push((format!("{source}.distance"), Value::Num(*distance)));
                out
            }
            Percept::Param { name, value } => vec![(name.clone(), value.clone())],
        }
    }
}
