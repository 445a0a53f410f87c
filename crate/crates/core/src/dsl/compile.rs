use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::ast::*;
use super::validate::{validate, ValidationReport, DEFAULT_GRID, DEFAULT_TICKS};
use crate::arm::{
    Ability, ActionSpec, DesireRule, Goal, InfoRecord, PlanLibrary, PossibilisticState, RoleSpec, SkillSet, World,
};
use crate::gas::{
    AutomatonType, FieldDecl, GasModel, GeoRefConvention, Location, NeighborhoodSpec, IDENTITY_TRANSITION,
    STATIC_NEIGHBORHOOD, STAY_MOVEMENT,
};
use crate::ids::EntityId;
use crate::magi::{
    AgentTypeTau, AgreementFn, DecisionFn, EntitySpec, Environment, Layer, PerceptionFn, PossibilisticSpec, Shape,
};
use crate::minds::{BackendSpec, MindSpec, RetrievalWeights};
use crate::rng::SeedStreams;
use crate::rule::{eval, Attr, EvalError, Member, Scope, Source, StreamSet};
use crate::value::{ParamMap, StateValue, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSettings {
    pub seed: u64,
    pub ticks: u64,
    pub stride: u64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledScenario {
    pub env: Environment,
    pub run: RunSettings,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("scenario does not validate:\n{0}")]
    Invalid(ValidationReport),
    /// A validated document failed to compile; this is a defect.
    #[error("internal compilation failure: {0}")]
    Internal(String),
}

/// Compiles with the run block's seed (0 when absent).
pub fn compile(doc: &ScenarioDoc) -> Result<CompiledScenario, CompileError> {
    compile_with_seed(doc, doc.run.seed.unwrap_or(0))
}

/// Compiles a validated document into a populated environment. The seed
/// drives random placements and random initial states.
pub fn compile_with_seed(doc: &ScenarioDoc, seed: u64) -> Result<CompiledScenario, CompileError> {
    let report = validate(doc);
    if report.has_errors() {
        return Err(CompileError::Invalid(report));
    }
    let model = build_model(doc);
    model.check().map_err(|e| CompileError::Internal(e.to_string()))?;
    let mut env = Environment::new(model, build_types(doc));
    env.global_params = doc.env.params.iter().cloned().collect();
    env.global_functions = doc.env.functions.clone();
    for l in &doc.layers {
        let mut layer = Layer::new(&l.name);
        layer.params = l.params.iter().cloned().collect();
        layer.functions = l.functions.clone();
        env.add_layer(layer)
            .map_err(|e| CompileError::Internal(e.to_string()))?;
    }
    let streams = SeedStreams::new(seed);
    for l in &doc.layers {
        for (i, p) in l.placements.iter().enumerate() {
            place(&mut env, &l.name, i, p, streams).map_err(CompileError::Internal)?;
        }
    }
    env.reset_neighborhoods();
    Ok(CompiledScenario {
        env,
        run: RunSettings {
            seed,
            ticks: doc.run.ticks.unwrap_or(DEFAULT_TICKS),
            stride: doc.run.stride.unwrap_or(1),
            outputs: doc.run.outputs.clone(),
        },
    })
}

/// The GAS part of a document: types, state schemas, rules and grid.
pub fn build_model(doc: &ScenarioDoc) -> GasModel {
    let mut model = GasModel::new(doc.grid.unwrap_or(DEFAULT_GRID));
    for r in &doc.rules {
        model.rules.insert(r.name.clone(), r.rule.clone());
    }
    for t in &doc.types {
        let schema = t
            .fields
            .iter()
            .map(|f| {
                (
                    f.name.clone(),
                    FieldDecl {
                        ty: f.ty,
                        default: f.default.clone(),
                    },
                )
            })
            .collect();
        let or = |v: &Option<String>, d: &str| v.clone().unwrap_or_else(|| d.to_string());
        model.types.insert(
            t.name.clone(),
            AutomatonType {
                schema,
                transition: or(&t.transition, IDENTITY_TRANSITION),
                movement: or(&t.movement, STAY_MOVEMENT),
                neighborhood: or(&t.neighbors, STATIC_NEIGHBORHOOD),
                neighborhood_spec: t.neighborhood.unwrap_or(NeighborhoodSpec::None),
            },
        );
    }
    model
}

/// The environment-side declaration (τ) of every type.
pub fn build_types(doc: &ScenarioDoc) -> BTreeMap<String, AgentTypeTau> {
    doc.types.iter().map(|t| (t.name.clone(), tau(t))).collect()
}

fn tau(t: &TypeDecl) -> AgentTypeTau {
    let mut tau = AgentTypeTau::new(&t.name, t.kind);
    if !t.shapes.is_empty() {
        tau.shapes = t.shapes.clone();
    }
    tau.skills = SkillSet {
        abilities: t
            .abilities
            .iter()
            .map(|a| Ability {
                pattern: a.pattern.clone(),
                action: a.action.clone(),
            })
            .collect(),
        capabilities: t
            .actions
            .iter()
            .map(|a| {
                let mut spec = ActionSpec::new(&a.name, a.precondition.clone(), a.effects.clone());
                spec.wake = a.wake.clone();
                spec.joint = a.joint;
                (a.name.clone(), spec)
            })
            .collect(),
    };
    tau.perception = t
        .perception
        .iter()
        .map(|p| match p {
            PerceptionDecl::Entities { radius, filter } => PerceptionFn::Entities {
                radius: *radius,
                filter: filter.clone(),
            },
            PerceptionDecl::Param(name) => PerceptionFn::Param(name.clone()),
        })
        .collect();
    tau.decisions = t
        .decisions
        .iter()
        .map(|(action, when)| DecisionFn {
            action: action.clone(),
            when: when.clone(),
        })
        .collect();
    tau.agreements = t
        .agreements
        .iter()
        .map(|a| AgreementFn {
            action: a.action.clone(),
            goal: a.goal.clone(),
            within: a.within,
        })
        .collect();
    tau.goals = t
        .goals
        .iter()
        .map(|g| Goal::new(&g.id.0, g.kind, g.condition.clone()))
        .collect();
    tau.preferences = t.preferences.iter().cloned().collect();
    tau.roles = t
        .roles
        .iter()
        .map(|r| RoleSpec {
            name: r.name.clone(),
            goals: r.goals.iter().cloned().collect(),
        })
        .collect();
    tau.use_cases = t.use_cases.clone();
    tau.plans = PlanLibrary {
        plans: t.plans.iter().map(|p| (p.goal.clone(), p.steps.clone())).collect(),
    };
    tau.activation = t.activation.clone();
    if let Some(n) = t.intentions {
        tau.max_intentions = usize::try_from(n).unwrap_or(usize::MAX);
    }
    if let Some(b) = t.commitment_bonus {
        tau.commitment_bonus = b;
    }
    tau.mind = t.mind.as_ref().map(mind_spec);
    tau.possibilistic = t.possibilistic.as_ref().map(|p| PossibilisticSpec {
        state: PossibilisticState {
            worlds: p
                .worlds
                .iter()
                .map(|w| {
                    (
                        w.name.clone(),
                        World {
                            pi: w.pi,
                            facts: w.facts.iter().cloned().collect(),
                        },
                    )
                })
                .collect(),
            desire_rules: p
                .desires
                .iter()
                .map(|(goal, guard)| DesireRule {
                    guard: guard.clone(),
                    goal: goal.clone(),
                })
                .collect(),
            last_info: None,
        },
        infos: p
            .infos
            .iter()
            .map(|i| {
                (
                    InfoRecord {
                        name: i.name.clone(),
                        worlds: i.worlds.iter().cloned().collect(),
                    },
                    i.when.clone(),
                )
            })
            .collect(),
    });
    tau
}

fn mind_spec(m: &MindDecl) -> MindSpec {
    let backend = match &m.backend {
        Some(BackendDecl::Scripted(path)) => BackendSpec::Scripted { path: path.clone() },
        Some(BackendDecl::External { command, perceive }) => BackendSpec::External {
            command: command.clone(),
            perceive: perceive.clone(),
        },
        Some(BackendDecl::RuleBased) | None => BackendSpec::RuleBased(m.productions.clone()),
    };
    let mut spec = MindSpec::new(backend);
    spec.capacity = m.memory.map(|n| usize::try_from(n).unwrap_or(usize::MAX));
    if let Some(k) = m.retrieve {
        spec.retrieve = usize::try_from(k).unwrap_or(usize::MAX);
    }
    if let Some((recency, keyword, decay)) = m.weights {
        spec.weights = RetrievalWeights {
            recency,
            keyword,
            decay,
        };
    }
    spec.templates = m.templates.clone();
    spec
}

/// Owner id for placement streams; disjoint from entity ids in practice and
/// from the parameter-function owners at the top of the range.
fn placement_owner(layer_index: usize) -> u64 {
    u64::MAX / 2 + layer_index as u64
}

fn lattice_cells(g: &GeoRefConvention) -> Vec<(i64, i64)> {
    match *g {
        GeoRefConvention::Lattice { width, height, .. } => (0..i64::from(height))
            .flat_map(|y| (0..i64::from(width)).map(move |x| (x, y)))
            .collect(),
        GeoRefConvention::Continuous { .. } => Vec::new(),
    }
}

fn place(env: &mut Environment, layer: &str, index: usize, p: &Placement, streams: SeedStreams) -> Result<(), String> {
    let li = env
        .layers()
        .iter()
        .position(|l| l.name == layer)
        .ok_or("layer vanished")?;
    let georef = env.model.georef;
    let mut rng = streams.stream(placement_owner(li), 0, &format!("place:{layer}:{index}"));
    let (locations, shape): (Vec<Location>, Option<Shape>) = match p {
        Placement::Entity { x, y, shape, .. } => {
            let loc = if georef.is_lattice() {
                Location::Cell(*x as i64, *y as i64)
            } else {
                Location::Point(*x, *y)
            };
            (vec![loc], *shape)
        }
        Placement::Fill { .. } => (
            lattice_cells(&georef)
                .into_iter()
                .map(|(x, y)| Location::Cell(x, y))
                .collect(),
            None,
        ),
        Placement::Populate {
            count,
            placing: Placing::Vacant,
            ..
        } => {
            let taken: BTreeSet<(i64, i64)> = env
                .entities()
                .filter_map(|e| match e.location {
                    Location::Cell(x, y) => Some((x, y)),
                    Location::Point(..) => None,
                })
                .collect();
            let mut free: Vec<(i64, i64)> = lattice_cells(&georef)
                .into_iter()
                .filter(|c| !taken.contains(c))
                .collect();
            let n = usize::try_from(*count).map_err(|e| e.to_string())?;
            if n > free.len() {
                return Err(format!("{n} vacant cells requested, {} free", free.len()));
            }
            let (chosen, _) = free.partial_shuffle(&mut rng, n);
            (chosen.iter().map(|&(x, y)| Location::Cell(x, y)).collect(), None)
        }
        Placement::Populate {
            count,
            placing: Placing::Random,
            ..
        } => {
            let locs = (0..*count)
                .map(|_| match georef {
                    GeoRefConvention::Lattice { width, height, .. } => {
                        Location::Cell(rng.gen_range(0..i64::from(width)), rng.gen_range(0..i64::from(height)))
                    }
                    GeoRefConvention::Continuous {
                        min_x,
                        min_y,
                        max_x,
                        max_y,
                        ..
                    } => Location::Point(rng.gen_range(min_x..max_x), rng.gen_range(min_y..max_y)),
                })
                .collect();
            (locs, None)
        }
    };
    for loc in locations {
        let id = env.next_id();
        let state = initial_state(env, li, p, id, loc, streams).map_err(|e| e.to_string())?;
        let spec = EntitySpec {
            type_name: p.type_name().to_string(),
            shape,
            location: loc,
            state,
        };
        env.create_entity(layer, spec).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn initial_state(
    env: &Environment,
    layer: usize,
    p: &Placement,
    id: EntityId,
    location: Location,
    streams: SeedStreams,
) -> Result<StateValue, EvalError> {
    let ty = p.type_name();
    let defaults = env.model.types[ty].default_state();
    let scope = InitScope {
        id,
        ty,
        location,
        state: &defaults,
        local: &env.layers()[layer].params,
        global: &env.global_params,
        rng: StreamSet::new(streams, id, 0, "I"),
    };
    p.state()
        .iter()
        .map(|a| Ok((a.target.clone(), eval(&a.value, &scope)?)))
        .collect()
}

/// Scope for initial-state expressions: the new entity's own attributes,
/// parameters, and random streams.
struct InitScope<'a> {
    id: EntityId,
    ty: &'a str,
    location: Location,
    state: &'a StateValue,
    local: &'a ParamMap,
    global: &'a ParamMap,
    rng: StreamSet,
}

impl Scope for InitScope<'_> {
    fn tick(&self) -> u64 {
        0
    }

    fn param(&self, name: &str) -> Option<Value> {
        self.local.get(name).or_else(|| self.global.get(name)).cloned()
    }

    fn self_attr(&self, attr: &Attr) -> Option<Value> {
        Some(match attr {
            Attr::Id => Value::Num(self.id.0 as f64),
            Attr::Type => Value::sym(self.ty),
            Attr::X => Value::Num(self.location.x()),
            Attr::Y => Value::Num(self.location.y()),
            Attr::Dist => return None,
            Attr::Field(f) => return self.state.get(f).cloned(),
        })
    }

    fn members(&self, source: Source) -> Result<Vec<Member<'_>>, EvalError> {
        Err(EvalError::Unavailable(source.keyword().to_string()))
    }

    fn draw(&self, stream: &str) -> Result<f64, EvalError> {
        Ok(self.rng.draw(stream))
    }
}
