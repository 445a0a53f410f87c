use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::types::{AgentTypeTau, EntityKind, Shape};
use crate::arm::AgentInternalState;
use crate::gas::{
    neighbors_by_convention, AutomatonRecord, GasModel, GasSnapshot, GeoError, Location, NeighborhoodSpec, ParamLookup,
};
use crate::ids::EntityId;
use crate::rule::{Assign, EvalError};
use crate::value::{ParamMap, StateValue, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MagiError {
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("duplicate layer `{0}`")]
    DuplicateLayer(String),
    #[error("unknown entity type `{0}`")]
    UnknownType(String),
    #[error("shape {shape} is not admissible for type `{ty}`")]
    InadmissibleShape { ty: String, shape: Shape },
    #[error(transparent)]
    OutOfBounds(#[from] GeoError),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("entity {0} is not an agent")]
    NotAnAgent(EntityId),
    #[error("field `{field}` of type `{ty}`: {reason}")]
    BadField { ty: String, field: String, reason: String },
    #[error("{context}: {source}")]
    Eval { context: String, source: EvalError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    #[serde(rename = "type")]
    pub type_name: String,
    pub shape: Shape,
    pub location: Location,
    pub state: StateValue,
    pub neighborhood: BTreeSet<EntityId>,
    pub observed: BTreeSet<EntityId>,
    #[serde(skip)]
    pub internal: Option<AgentInternalState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub params: ParamMap,
    pub functions: Vec<Assign>,
    pub entities: BTreeMap<EntityId, Entity>,
}

impl Layer {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            params: ParamMap::new(),
            functions: Vec::new(),
            entities: BTreeMap::new(),
        }
    }
}

/// What to create: type, optional shape (first admissible by default),
/// location and field overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct EntitySpec {
    pub type_name: String,
    pub shape: Option<Shape>,
    pub location: Location,
    pub state: StateValue,
}

impl EntitySpec {
    pub fn new(type_name: &str, location: Location) -> Self {
        Self {
            type_name: type_name.into(),
            shape: None,
            location,
            state: StateValue::new(),
        }
    }
}

/// Global parameters and functions, ordered layers of entities, and the
/// entity types with their GAS rule maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub model: GasModel,
    pub types: BTreeMap<String, AgentTypeTau>,
    pub global_params: ParamMap,
    pub global_functions: Vec<Assign>,
    layers: Vec<Layer>,
    homes: BTreeMap<EntityId, usize>,
    next_id: u64,
}

impl Environment {
    pub fn new(model: GasModel, types: BTreeMap<String, AgentTypeTau>) -> Self {
        Self {
            model,
            types,
            global_params: ParamMap::new(),
            global_functions: Vec::new(),
            layers: Vec::new(),
            homes: BTreeMap::new(),
            next_id: 0,
        }
    }

    pub fn add_layer(&mut self, layer: Layer) -> Result<(), MagiError> {
        if self.layers.iter().any(|l| l.name == layer.name) {
            return Err(MagiError::DuplicateLayer(layer.name));
        }
        for id in layer.entities.keys() {
            self.homes.insert(*id, self.layers.len());
            self.next_id = self.next_id.max(id.0 + 1);
        }
        self.layers.push(layer);
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut Layer> {
        self.layers.iter_mut().find(|l| l.name == name)
    }

    pub fn layer_of(&self, id: EntityId) -> Option<&Layer> {
        self.homes.get(&id).map(|i| &self.layers[*i])
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.homes.get(&id).and_then(|i| self.layers[*i].entities.get(&id))
    }

    pub fn entity_mut(&mut self, id: EntityId) -> Option<&mut Entity> {
        let i = *self.homes.get(&id)?;
        self.layers[i].entities.get_mut(&id)
    }

    /// All entities in id order.
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.homes.keys().filter_map(|id| self.entity(*id))
    }

    pub fn entity_ids(&self) -> Vec<EntityId> {
        self.homes.keys().copied().collect()
    }

    pub fn agent_ids(&self) -> Vec<EntityId> {
        self.entities()
            .filter(|e| e.kind == EntityKind::Agent)
            .map(|e| e.id)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.homes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.homes.is_empty()
    }

    pub fn tau(&self, ty: &str) -> Option<&AgentTypeTau> {
        self.types.get(ty)
    }

    pub fn next_id(&self) -> EntityId {
        EntityId(self.next_id)
    }

    /// Layer-local parameter of the entity's layer, else global.
    pub fn param_for(&self, owner: EntityId, name: &str) -> Option<Value> {
        self.layer_of(owner)
            .and_then(|l| l.params.get(name))
            .or_else(|| self.global_params.get(name))
            .cloned()
    }

    /// Allocates the next id and places a new entity. Its neighborhood is
    /// computed from its type's neighborhood spec against current locations.
    pub fn create_entity(&mut self, layer: &str, spec: EntitySpec) -> Result<EntityId, MagiError> {
        let li = self
            .layers
            .iter()
            .position(|l| l.name == layer)
            .ok_or_else(|| MagiError::UnknownLayer(layer.to_string()))?;
        let tau = self
            .types
            .get(&spec.type_name)
            .ok_or_else(|| MagiError::UnknownType(spec.type_name.clone()))?;
        let automaton = self
            .model
            .types
            .get(&spec.type_name)
            .ok_or_else(|| MagiError::UnknownType(spec.type_name.clone()))?;
        let shape = spec
            .shape
            .unwrap_or(tau.shapes.first().copied().unwrap_or(Shape::Point));
        if !tau.admits(&shape) {
            return Err(MagiError::InadmissibleShape {
                ty: tau.name.clone(),
                shape,
            });
        }
        self.model.georef.check(&spec.location)?;
        let mut state = automaton.default_state();
        for (field, value) in spec.state {
            let bad = |reason: String| MagiError::BadField {
                ty: tau.name.clone(),
                field: field.clone(),
                reason,
            };
            let decl = automaton.schema.get(&field).ok_or_else(|| bad("not declared".into()))?;
            if decl.ty != value.ty() {
                return Err(bad(format!("expected {}, got {}", decl.ty, value.ty())));
            }
            state.insert(field, value);
        }
        let neighborhood = self.around(&spec.location, &automaton.neighborhood_spec);
        let id = EntityId(self.next_id);
        self.next_id += 1;
        let internal = (tau.kind == EntityKind::Agent).then(|| tau.initial_state());
        let entity = Entity {
            id,
            kind: tau.kind,
            type_name: spec.type_name,
            shape,
            location: spec.location,
            state,
            neighborhood,
            observed: BTreeSet::new(),
            internal,
        };
        self.layers[li].entities.insert(id, entity);
        self.homes.insert(id, li);
        Ok(id)
    }

    /// Entities at distance `(0, reach]` of `loc` under `spec`, by linear scan.
    pub fn around(&self, loc: &Location, spec: &NeighborhoodSpec) -> BTreeSet<EntityId> {
        let metric = spec.metric(&self.model.georef);
        let reach = spec.reach();
        self.entities()
            .filter(|e| {
                let d = self.model.georef.distance(loc, &e.location, metric);
                d > 0.0 && d <= reach
            })
            .map(|e| e.id)
            .collect()
    }

    /// Removes an entity and purges its id from every observed set and neighborhood.
    pub fn destroy_entity(&mut self, id: EntityId) -> Result<Entity, MagiError> {
        let li = self.homes.remove(&id).ok_or(MagiError::UnknownEntity(id))?;
        let gone = self.layers[li].entities.remove(&id).expect("home index in sync");
        for layer in &mut self.layers {
            for e in layer.entities.values_mut() {
                e.observed.remove(&id);
                e.neighborhood.remove(&id);
            }
        }
        Ok(gone)
    }

    /// Recomputes every entity's neighborhood from its type's spec.
    pub fn reset_neighborhoods(&mut self) {
        let snap = self.gas_snapshot(0);
        let fresh: Vec<(EntityId, BTreeSet<EntityId>)> = snap
            .automata
            .iter()
            .map(|a| {
                let spec = self.model.types[&a.kind].neighborhood_spec;
                (
                    a.id,
                    neighbors_by_convention(&self.model.georef, &spec, &a.location, &snap),
                )
            })
            .collect();
        for (id, n) in fresh {
            if let Some(e) = self.entity_mut(id) {
                e.neighborhood = n;
            }
        }
    }

    /// Every entity as an automaton, in id order.
    pub fn gas_snapshot(&self, tick: u64) -> GasSnapshot {
        GasSnapshot::new(
            tick,
            self.entities()
                .map(|e| AutomatonRecord {
                    id: e.id,
                    kind: e.type_name.clone(),
                    state: e.state.clone(),
                    location: e.location,
                    neighborhood: e.neighborhood.clone(),
                })
                .collect(),
        )
    }

    /// Writes state, location and neighborhood back from a stepped snapshot.
    pub fn commit_snapshot(&mut self, snapshot: &GasSnapshot) -> Result<(), MagiError> {
        for a in &snapshot.automata {
            let e = self.entity_mut(a.id).ok_or(MagiError::UnknownEntity(a.id))?;
            e.state = a.state.clone();
            e.location = a.location;
            e.neighborhood = a.neighborhood.clone();
        }
        Ok(())
    }

    /// Keeps every referenced id pointing at a live entity.
    pub fn check_references(&self) -> Result<(), MagiError> {
        for e in self.entities() {
            for id in e.observed.iter().chain(&e.neighborhood) {
                if self.entity(*id).is_none() {
                    return Err(MagiError::UnknownEntity(*id));
                }
            }
        }
        Ok(())
    }
}

impl ParamLookup for Environment {
    fn lookup(&self, owner: EntityId, name: &str) -> Option<Value> {
        self.param_for(owner, name)
    }
}
