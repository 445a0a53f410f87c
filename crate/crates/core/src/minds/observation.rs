use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MindError;
use crate::ids::EntityId;
use crate::percept::Percept;

pub const NOTHING_OBSERVED: &str = "nothing observed";
pub const ENTITY_TEMPLATE: &str = "I see {type} {id} at distance {distance}.";
pub const PARAM_TEMPLATE: &str = "The {name} is {value}.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub tick: u64,
    pub agent: EntityId,
    pub text: String,
    pub structured: Vec<Percept>,
}

/// Sentence templates keyed by percept kind: an entity type name, the
/// catch-all `entity`, or `param`. Placeholders are `{name}` style.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl TemplateSet {
    /// No templates at all; every percept kind is missing.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn standard() -> Self {
        let mut t = Self::empty();
        t.insert("entity", ENTITY_TEMPLATE);
        t.insert("param", PARAM_TEMPLATE);
        t
    }

    pub fn insert(&mut self, kind: &str, template: &str) {
        self.templates.insert(kind.into(), template.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.templates.iter()
    }

    fn lookup(&self, p: &Percept) -> Option<&str> {
        let specific = self.templates.get(p.template_kind());
        let generic = match p {
            Percept::Entity { .. } => self.templates.get("entity"),
            Percept::Param { .. } => None,
        };
        specific.or(generic).map(String::as_str)
    }

    pub fn render_one(&self, p: &Percept) -> Result<String, MindError> {
        let template = self
            .lookup(p)
            .ok_or_else(|| MindError::MissingTemplate(p.template_kind().to_string()))?;
        let mut vars: BTreeMap<String, String> = BTreeMap::new();
        match p {
            Percept::Entity {
                source,
                kind,
                distance,
                location,
                state,
            } => {
                vars.extend(state.iter().map(|(k, v)| (k.clone(), v.to_string())));
                vars.insert("id".into(), source.to_string());
                vars.insert("type".into(), kind.clone());
                vars.insert("distance".into(), distance.to_string());
                vars.insert("x".into(), location.x().to_string());
                vars.insert("y".into(), location.y().to_string());
            }
            Percept::Param { name, value } => {
                vars.insert("name".into(), name.clone());
                vars.insert("value".into(), value.to_string());
            }
        }
        Ok(fill(template, &vars))
    }
}

// Unknown placeholders are left as written.
fn fill(template: &str, vars: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if vars.contains_key(&after[..close]) => {
                out.push_str(&vars[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders percepts into one observation; sentences are joined by spaces.
pub fn perceive_text(
    agent: EntityId,
    tick: u64,
    percepts: &[Percept],
    templates: &TemplateSet,
) -> Result<ObservationRecord, MindError> {
    let text = if percepts.is_empty() {
        NOTHING_OBSERVED.to_string()
    } else {
        percepts
            .iter()
            .map(|p| templates.render_one(p))
            .collect::<Result<Vec<_>, _>>()?
            .join(" ")
    };
    Ok(ObservationRecord {
        tick,
        agent,
        text,
        structured: percepts.to_vec(),
    })
}
