use std::collections::BTreeMap;

use super::env::{Entity, Environment};
use crate::arm::AgentInternalState;
use crate::ids::EntityId;
use crate::percept::Percept;
use crate::rng::SeedStreams;
use crate::rule::{Attr, EvalError, Member, Scope, Source, StreamSet};
use crate::value::{ParamMap, StateValue, Value};

/// Evaluation context for one entity's perception filters, decisions,
/// action preconditions and effects, and goal conditions.
pub struct AgentScope<'a> {
    env: &'a Environment,
    who: &'a Entity,
    state: &'a StateValue,
    internal: Option<&'a AgentInternalState>,
    percepts: &'a [Percept],
    facts: Option<&'a BTreeMap<String, Value>>,
    tick: u64,
    rng: StreamSet,
}

impl<'a> AgentScope<'a> {
    pub fn new(
        env: &'a Environment,
        who: &'a Entity,
        percepts: &'a [Percept],
        tick: u64,
        streams: SeedStreams,
        prefix: &'static str,
    ) -> Self {
        Self {
            env,
            who,
            state: &who.state,
            internal: who.internal.as_ref(),
            percepts,
            facts: None,
            tick,
            rng: StreamSet::new(streams, who.id, tick, prefix),
        }
    }

    /// Reads `state` in place of the entity's committed state.
    pub fn with_state(mut self, state: &'a StateValue) -> Self {
        self.state = state;
        self
    }

    /// Reads beliefs from `internal` instead of the entity's stored internal state.
    pub fn with_internal(mut self, internal: &'a AgentInternalState) -> Self {
        self.internal = Some(internal);
        self
    }

    /// Lets world facts shadow beliefs of the same name.
    pub fn with_facts(mut self, facts: &'a BTreeMap<String, Value>) -> Self {
        self.facts = Some(facts);
        self
    }

    fn member<'m>(&self, e: &'m Entity, distance: f64) -> Member<'m> {
        Member {
            id: e.id,
            kind: &e.type_name,
            state: &e.state,
            location: e.location,
            distance,
        }
    }

    fn distance_to(&self, other: &Entity) -> f64 {
        let spec = self.env.model.types[&self.who.type_name].neighborhood_spec;
        let georef = &self.env.model.georef;
        georef.distance(&self.who.location, &other.location, spec.metric(georef))
    }
}

impl Scope for AgentScope<'_> {
    fn tick(&self) -> u64 {
        self.tick
    }

    fn param(&self, name: &str) -> Option<Value> {
        self.env.param_for(self.who.id, name)
    }

    fn self_attr(&self, attr: &Attr) -> Option<Value> {
        Some(match attr {
            Attr::Id => Value::Num(self.who.id.0 as f64),
            Attr::Type => Value::sym(self.who.type_name.clone()),
            Attr::X => Value::Num(self.who.location.x()),
            Attr::Y => Value::Num(self.who.location.y()),
            Attr::Dist => return None,
            Attr::Field(f) => return self.state.get(f).cloned(),
        })
    }

    fn belief(&self, key: &str) -> Option<Value> {
        if let Some(v) = self.facts.and_then(|f| f.get(key)) {
            return Some(v.clone());
        }
        self.internal.and_then(|s| s.belief(key)).cloned()
    }

    fn members(&self, source: Source) -> Result<Vec<Member<'_>>, EvalError> {
        match source {
            Source::Neighbors => self
                .who
                .neighborhood
                .iter()
                .map(|id| {
                    let e = self
                        .env
                        .entity(*id)
                        .ok_or_else(|| EvalError::Unbound(format!("neighbor {id}")))?;
                    Ok(self.member(e, self.distance_to(e)))
                })
                .collect(),
            Source::Nearby => {
                let spec = self.env.model.types[&self.who.type_name].neighborhood_spec;
                Ok(self
                    .env
                    .around(&self.who.location, &spec)
                    .into_iter()
                    .filter_map(|id| self.env.entity(id))
                    .map(|e| self.member(e, self.distance_to(e)))
                    .collect())
            }
            Source::Percepts => Ok(self
                .percepts
                .iter()
                .filter_map(|p| match p {
                    Percept::Entity {
                        source,
                        kind,
                        distance,
                        location,
                        state,
                    } => Some(Member {
                        id: *source,
                        kind,
                        state,
                        location: *location,
                        distance: *distance,
                    }),
                    Percept::Param { .. } => None,
                })
                .collect()),
        }
    }

    fn draw(&self, stream: &str) -> Result<f64, EvalError> {
        Ok(self.rng.draw(stream))
    }
}

/// Context for parameter functions: layer parameters shadow globals.
pub struct ParamScope<'a> {
    pub local: Option<&'a ParamMap>,
    pub global: &'a ParamMap,
    pub tick: u64,
    pub rng: StreamSet,
}

impl ParamScope<'_> {
    /// Stream owner used for a layer's functions (globals use `u64::MAX`).
    pub fn owner(layer_index: Option<usize>) -> EntityId {
        EntityId(u64::MAX - layer_index.map_or(0, |i| i as u64 + 1))
    }
}

impl Scope for ParamScope<'_> {
    fn tick(&self) -> u64 {
        self.tick
    }

    fn param(&self, name: &str) -> Option<Value> {
        self.local
            .and_then(|l| l.get(name))
            .or_else(|| self.global.get(name))
            .cloned()
    }

    fn self_attr(&self, _: &Attr) -> Option<Value> {
        None
    }

    fn members(&self, source: Source) -> Result<Vec<Member<'_>>, EvalError> {
        Err(EvalError::Unavailable(source.keyword().to_string()))
    }

    fn draw(&self, stream: &str) -> Result<f64, EvalError> {
        Ok(self.rng.draw(stream))
    }
}
