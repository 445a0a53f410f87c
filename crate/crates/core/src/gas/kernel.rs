//! Rule application and the synchronous GAS step.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::georef::{GeoRefConvention, Location, Metric, NeighborhoodSpec};
use super::index::SpatialIndex;
use super::model::{AutomatonRecord, GasModel, GasSnapshot, ModelError, Rule};
use crate::ids::EntityId;
use crate::rng::SeedStreams;
use crate::rule::{
    eval, eval_bool, eval_for, eval_num, Attr, EvalError, Member, MoveExpr, NeighborExpr, Scope, Source, StreamSet,
};
use crate::value::{ParamMap, StateValue, Value};

/// Parameter resolution for an automaton (layer-local first, then global).
pub trait ParamLookup {
    fn lookup(&self, owner: EntityId, name: &str) -> Option<Value>;
}

impl ParamLookup for ParamMap {
    fn lookup(&self, _owner: EntityId, name: &str) -> Option<Value> {
        self.get(name).cloned()
    }
}

pub struct NoParams;

impl ParamLookup for NoParams {
    fn lookup(&self, _owner: EntityId, _name: &str) -> Option<Value> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("rule `{rule}` on automaton {automaton}: {source}")]
pub struct RuleError {
    pub rule: String,
    pub automaton: EntityId,
    pub source: EvalError,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("snapshot inconsistent with model: {0}")]
    Inconsistent(#[from] ModelError),
    #[error("{} rule evaluation error(s); first: {}", .0.len(), .0[0])]
    Rules(Vec<RuleError>),
}

/// Resolved N_t of one automaton.
#[derive(Debug, Clone)]
pub struct NeighborhoodView<'a> {
    pub members: Vec<&'a AutomatonRecord>,
}

/// Read-only evaluation context over a pre-step snapshot.
pub struct GasEval<'a> {
    model: &'a GasModel,
    snapshot: &'a GasSnapshot,
    index: SpatialIndex,
    by_id: BTreeMap<EntityId, usize>,
    params: &'a dyn ParamLookup,
    streams: SeedStreams,
}

fn bucket_hint(model: &GasModel) -> f64 {
    model
        .types
        .values()
        .map(|t| t.neighborhood_spec.reach())
        .fold(0.0, f64::max)
}

impl<'a> GasEval<'a> {
    pub fn new(
        model: &'a GasModel,
        snapshot: &'a GasSnapshot,
        params: &'a dyn ParamLookup,
        streams: SeedStreams,
    ) -> Self {
        let index = SpatialIndex::build(
            &model.georef,
            snapshot.automata.iter().map(|a| (a.id, a.location)),
            bucket_hint(model),
        );
        let by_id = snapshot.automata.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
        Self {
            model,
            snapshot,
            index,
            by_id,
            params,
            streams,
        }
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn record(&self, id: EntityId) -> Option<&'a AutomatonRecord> {
        self.by_id.get(&id).map(|i| &self.snapshot.automata[*i])
    }

    fn spec_of(&self, who: &AutomatonRecord) -> NeighborhoodSpec {
        self.model
            .types
            .get(&who.kind)
            .map(|t| t.neighborhood_spec)
            .unwrap_or(NeighborhoodSpec::None)
    }

    pub fn view(&self, who: &AutomatonRecord) -> Result<NeighborhoodView<'a>, EvalError> {
        let members = who
            .neighborhood
            .iter()
            .map(|id| {
                self.record(*id)
                    .ok_or_else(|| EvalError::Unbound(format!("neighbor {id}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NeighborhoodView { members })
    }

    fn scope<'s>(
        &'s self,
        who: &'s AutomatonRecord,
        prefix: &'static str,
    ) -> Result<AutomatonScope<'s, 'a>, EvalError> {
        let spec = self.spec_of(who);
        Ok(AutomatonScope {
            eval: self,
            who,
            view: self.view(who)?,
            spec,
            metric: spec.metric(&self.model.georef),
            rng: StreamSet::new(self.streams, who.id, self.snapshot.tick, prefix),
        })
    }

    fn rule(&self, name: &str, who: &AutomatonRecord) -> Result<&'a Rule, RuleError> {
        self.model.rule(name).ok_or_else(|| RuleError {
            rule: name.to_string(),
            automaton: who.id,
            source: EvalError::Unbound(format!("rule `{name}`")),
        })
    }

    /// T_s: (S_t, L_t, N_t) -> S_{t+1}.
    pub fn apply_transition(&self, rule: &str, who: &AutomatonRecord) -> Result<StateValue, RuleError> {
        let wrap = |source| RuleError {
            rule: rule.to_string(),
            automaton: who.id,
            source,
        };
        let Rule::Transition(assigns) = self.rule(rule, who)? else {
            return Err(wrap(EvalError::Invalid(format!("`{rule}` is not a transition rule"))));
        };
        let scope = self.scope(who, "T").map_err(wrap)?;
        let schema = self.model.types.get(&who.kind).map(|t| &t.schema);
        let mut next = who.state.clone();
        for a in assigns {
            let v = eval(&a.value, &scope).map_err(wrap)?;
            if let Some(decl) = schema.and_then(|s| s.get(&a.target)) {
                if decl.ty != v.ty() {
                    return Err(wrap(EvalError::TypeMismatch {
                        expected: decl.ty,
                        found: v.ty(),
                        context: format!("assignment to `{}`", a.target),
                    }));
                }
            } else if schema.is_some() {
                return Err(wrap(EvalError::Unbound(format!("state field `{}`", a.target))));
            }
            next.insert(a.target.clone(), v);
        }
        Ok(next)
    }

    /// M_L: (S_t, L_t, N_t) -> L_{t+1}. Results are clamped or wrapped into
    /// bounds, never rejected.
    pub fn apply_movement(&self, rule: &str, who: &AutomatonRecord) -> Result<Location, RuleError> {
        self.movement(rule, who).map(|(l, _)| l)
    }

    /// The new location, and whether it is a vacancy claimed by `random_vacant`.
    fn movement(&self, rule: &str, who: &AutomatonRecord) -> Result<(Location, bool), RuleError> {
        let wrap = |source| RuleError {
            rule: rule.to_string(),
            automaton: who.id,
            source,
        };
        let Rule::Movement(body) = self.rule(rule, who)? else {
            return Err(wrap(EvalError::Invalid(format!("`{rule}` is not a movement rule"))));
        };
        let scope = self.scope(who, "M").map_err(wrap)?;
        self.eval_move(body, who, &scope).map_err(wrap)
    }

    fn eval_move(
        &self,
        body: &MoveExpr,
        who: &AutomatonRecord,
        scope: &AutomatonScope<'_, '_>,
    ) -> Result<(Location, bool), EvalError> {
        let georef = &self.model.georef;
        let here = who.location;
        match body {
            MoveExpr::Stay => Ok((here, false)),
            MoveExpr::Step(dx, dy) => {
                let (dx, dy) = (eval_num(dx, scope)?, eval_num(dy, scope)?);
                Ok((georef.normalize(here.x() + dx, here.y() + dy), false))
            }
            MoveExpr::Goto(x, y) => Ok((georef.normalize(eval_num(x, scope)?, eval_num(y, scope)?), false)),
            MoveExpr::RandomVacant { stream, radius } => {
                let Location::Cell(cx, cy) = here else {
                    return Err(EvalError::Invalid("random_vacant needs a lattice".into()));
                };
                let candidates: Vec<(i64, i64)> = match radius {
                    None => self.index.vacant_cells(),
                    Some(r) => {
                        let r = eval_num(r, scope)?.max(0.0).floor();
                        let mut cells: Vec<(i64, i64)> = self
                            .index
                            .ring_cells((cx, cy), Metric::Chebyshev, r)
                            .into_iter()
                            .filter(|(x, y)| self.index.is_vacant(*x, *y))
                            .collect();
                        cells.sort_by_key(|(x, y)| (*y, *x));
                        cells
                    }
                };
                if candidates.is_empty() {
                    return Ok((here, false));
                }
                let u = scope.rng.draw(stream);
                let pick = ((u * candidates.len() as f64) as usize).min(candidates.len() - 1);
                let (x, y) = candidates[pick];
                Ok((Location::Cell(x, y), true))
            }
            MoveExpr::If(c, t, e) => {
                if eval_bool(c, scope)? {
                    self.eval_move(t, who, scope)
                } else {
                    self.eval_move(e, who, scope)
                }
            }
        }
    }

    /// R_N: (S_t, L_t, N_t) -> N_{t+1}. Never contains `who` itself.
    pub fn apply_neighborhood(&self, rule: &str, who: &AutomatonRecord) -> Result<BTreeSet<EntityId>, RuleError> {
        let wrap = |source| RuleError {
            rule: rule.to_string(),
            automaton: who.id,
            source,
        };
        let Rule::Neighborhood(body) = self.rule(rule, who)? else {
            return Err(wrap(EvalError::Invalid(format!("`{rule}` is not a neighborhood rule"))));
        };
        let scope = self.scope(who, "R").map_err(wrap)?;
        let mut set = self.eval_neighbors(body, who, &scope).map_err(wrap)?;
        set.remove(&who.id);
        Ok(set)
    }

    fn eval_neighbors(
        &self,
        body: &NeighborExpr,
        who: &AutomatonRecord,
        scope: &AutomatonScope<'_, '_>,
    ) -> Result<BTreeSet<EntityId>, EvalError> {
        match body {
            NeighborExpr::Static => Ok(who.neighborhood.clone()),
            NeighborExpr::Empty => Ok(BTreeSet::new()),
            NeighborExpr::Geometric => Ok(self
                .index
                .within(&who.location, &scope.spec)
                .into_iter()
                .map(|(id, _)| id)
                .collect()),
            NeighborExpr::Nearest(k) => {
                let k = eval_num(k, scope)?.max(0.0).floor() as usize;
                let mut all: Vec<(f64, EntityId)> = self
                    .index
                    .items()
                    .iter()
                    .filter(|(id, _)| *id != who.id)
                    .map(|(id, loc)| (self.model.georef.distance(&who.location, loc, scope.metric), *id))
                    .filter(|(d, _)| *d > 0.0)
                    .collect();
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                Ok(all.into_iter().take(k).map(|(_, id)| id).collect())
            }
            NeighborExpr::Filter(pred) => {
                let mut out = BTreeSet::new();
                for m in scope.members(Source::Neighbors)? {
                    let keep = eval_for(pred, scope, &m)?;
                    match keep {
                        Value::Bool(true) => {
                            out.insert(m.id);
                        }
                        Value::Bool(false) => {}
                        other => {
                            return Err(EvalError::TypeMismatch {
                                expected: crate::value::Ty::Bool,
                                found: other.ty(),
                                context: "neighbor filter".into(),
                            })
                        }
                    }
                }
                Ok(out)
            }
            NeighborExpr::If(c, t, e) => {
                if eval_bool(c, scope)? {
                    self.eval_neighbors(t, who, scope)
                } else {
                    self.eval_neighbors(e, who, scope)
                }
            }
        }
    }
}

struct AutomatonScope<'s, 'a> {
    eval: &'s GasEval<'a>,
    who: &'s AutomatonRecord,
    view: NeighborhoodView<'a>,
    spec: NeighborhoodSpec,
    metric: Metric,
    rng: StreamSet,
}

impl AutomatonScope<'_, '_> {
    fn member<'m>(&self, rec: &'m AutomatonRecord) -> Member<'m> {
        Member {
            id: rec.id,
            kind: &rec.kind,
            state: &rec.state,
            location: rec.location,
            distance: self
                .eval
                .model
                .georef
                .distance(&self.who.location, &rec.location, self.metric),
        }
    }
}

impl Scope for AutomatonScope<'_, '_> {
    fn tick(&self) -> u64 {
        self.eval.snapshot.tick
    }

    fn param(&self, name: &str) -> Option<Value> {
        self.eval.params.lookup(self.who.id, name)
    }

    fn self_attr(&self, attr: &Attr) -> Option<Value> {
        self_attr(self.who, attr)
    }

    fn members(&self, source: Source) -> Result<Vec<Member<'_>>, EvalError> {
        match source {
            Source::Neighbors => Ok(self.view.members.iter().map(|r| self.member(r)).collect()),
            Source::Nearby => Ok(self
                .eval
                .index
                .within(&self.who.location, &self.spec)
                .into_iter()
                .filter_map(|(id, d)| {
                    self.eval.record(id).map(|r| Member {
                        distance: d,
                        ..self.member(r)
                    })
                })
                .collect()),
            Source::Percepts => Err(EvalError::Unavailable("percepts".into())),
        }
    }

    fn draw(&self, stream: &str) -> Result<f64, EvalError> {
        Ok(self.rng.draw(stream))
    }
}

pub(crate) fn self_attr(who: &AutomatonRecord, attr: &Attr) -> Option<Value> {
    Some(match attr {
        Attr::Id => Value::Num(who.id.0 as f64),
        Attr::Type => Value::sym(who.kind.clone()),
        Attr::X => Value::Num(who.location.x()),
        Attr::Y => Value::Num(who.location.y()),
        Attr::Dist => return None,
        Attr::Field(f) => return who.state.get(f).cloned(),
    })
}

/// Automata around `l` under the convention and spec: Chebyshev distance for
/// Moore, Manhattan for von Neumann, Euclidean for radius; distance in
/// `(0, reach]`.
pub fn neighbors_by_convention(
    georef: &GeoRefConvention,
    spec: &NeighborhoodSpec,
    l: &Location,
    snapshot: &GasSnapshot,
) -> BTreeSet<EntityId> {
    let index = SpatialIndex::build(
        georef,
        snapshot.automata.iter().map(|a| (a.id, a.location)),
        spec.reach(),
    );
    index.within(l, spec).into_iter().map(|(id, _)| id).collect()
}

/// Advances the snapshot by one tick. All three rule maps read the pre-step
/// snapshot and the results are committed together, so the iteration order
/// over automata cannot affect the outcome. On any rule error nothing is
/// committed and every error is reported.
///
/// A vacant cell claimed by several `random_vacant` moves goes to one
/// claimant, chosen by a seeded per-automaton draw; the others stay put.
pub fn step(
    model: &GasModel,
    snapshot: &GasSnapshot,
    streams: SeedStreams,
    params: &dyn ParamLookup,
) -> Result<GasSnapshot, StepError> {
    snapshot.check(model)?;
    let eval = GasEval::new(model, snapshot, params, streams);
    let mut next = Vec::with_capacity(snapshot.automata.len());
    let mut errors = Vec::new();
    let mut claims: BTreeMap<(i64, i64), (u64, EntityId)> = BTreeMap::new();
    let mut claimed = BTreeSet::new();
    for who in &snapshot.automata {
        let ty = &model.types[&who.kind];
        let state = eval.apply_transition(&ty.transition, who);
        let location = eval.movement(&ty.movement, who).map(|(l, claim)| {
            if let (true, Location::Cell(x, y)) = (claim, l) {
                let rank = (streams.derive(who.id.0, snapshot.tick, "M:claim"), who.id);
                claimed.insert(who.id);
                let best = claims.entry((x, y)).or_insert(rank);
                *best = (*best).min(rank);
            }
            l
        });
        let neighborhood = eval.apply_neighborhood(&ty.neighborhood, who);
        match (state, location, neighborhood) {
            (Ok(state), Ok(location), Ok(neighborhood)) => next.push(AutomatonRecord {
                id: who.id,
                kind: who.kind.clone(),
                state,
                location,
                neighborhood,
            }),
            (s, l, n) => {
                errors.extend(s.err());
                errors.extend(l.err());
                errors.extend(n.err());
            }
        }
    }
    if !errors.is_empty() {
        return Err(StepError::Rules(errors));
    }
    if !claimed.is_empty() {
        for (rec, old) in next.iter_mut().zip(&snapshot.automata) {
            if let Location::Cell(x, y) = rec.location {
                if claimed.contains(&rec.id) && claims[&(x, y)].1 != rec.id {
                    rec.location = old.location;
                }
            }
        }
    }
    Ok(GasSnapshot::new(snapshot.tick + 1, next))
}
