use std::collections::{BTreeMap, BTreeSet};

use super::env::{Environment, MagiError};
use super::scope::{AgentScope, ParamScope};
use super::types::{EntityKind, PerceptionFn};
use crate::arm::{ActionIntent, Commitment, CommitmentId};
use crate::ids::EntityId;
use crate::percept::Percept;
use crate::rng::SeedStreams;
use crate::rule::{eval, eval_bool, eval_for, eval_num, Assign, EvalError, Member, StreamSet};
use crate::value::{ParamMap, StateValue, Value};

fn eval_err(context: String) -> impl FnOnce(EvalError) -> MagiError {
    move |source| MagiError::Eval { context, source }
}

/// Percepts of `agent` at its current location and body: entities in id
/// order (each at most once), then parameters in function order.
pub fn perceive(
    env: &Environment,
    agent: EntityId,
    tick: u64,
    streams: SeedStreams,
) -> Result<Vec<Percept>, MagiError> {
    let who = env.entity(agent).ok_or(MagiError::UnknownEntity(agent))?;
    if who.kind != EntityKind::Agent {
        return Err(MagiError::NotAnAgent(agent));
    }
    let tau = env
        .tau(&who.type_name)
        .ok_or_else(|| MagiError::UnknownType(who.type_name.clone()))?;
    let scope = AgentScope::new(env, who, &[], tick, streams, "P");
    let georef = &env.model.georef;
    let metric = georef.default_metric();
    let mut seen: BTreeMap<EntityId, Percept> = BTreeMap::new();
    let mut params = Vec::new();
    for (i, f) in tau.perception.iter().enumerate() {
        match f {
            PerceptionFn::Entities { radius, filter } => {
                for other in env.entities() {
                    if other.id == agent || seen.contains_key(&other.id) {
                        continue;
                    }
                    let d = georef.distance(&who.location, &other.location, metric);
                    if d > radius + who.shape.extent() + other.shape.extent() {
                        continue;
                    }
                    if let Some(filter) = filter {
                        let m = Member {
                            id: other.id,
                            kind: &other.type_name,
                            state: &other.state,
                            location: other.location,
                            distance: d,
                        };
                        let keep = eval_for(filter, &scope, &m).map_err(eval_err(format!(
                            "perception function {} of `{}`",
                            i + 1,
                            tau.name
                        )))?;
                        if keep != Value::Bool(true) {
                            continue;
                        }
                    }
                    seen.insert(
                        other.id,
                        Percept::Entity {
                            source: other.id,
                            kind: other.type_name.clone(),
                            distance: d,
                            location: other.location,
                            state: other.state.clone(),
                        },
                    );
                }
            }
            PerceptionFn::Param(name) => {
                let value = env.param_for(agent, name).ok_or_else(|| MagiError::Eval {
                    context: format!("perception of `{name}` by `{}`", tau.name),
                    source: EvalError::Unbound(format!("parameter `{name}`")),
                })?;
                params.push(Percept::Param {
                    name: name.clone(),
                    value,
                });
            }
        }
    }
    Ok(seen.into_values().chain(params).collect())
}

/// Intents from decision functions, then abilities, in declaration order.
/// Each action appears at most once and only if its precondition holds.
pub fn decide(
    env: &Environment,
    agent: EntityId,
    percepts: &[Percept],
    tick: u64,
    streams: SeedStreams,
) -> Result<Vec<ActionIntent>, MagiError> {
    let who = env.entity(agent).ok_or(MagiError::UnknownEntity(agent))?;
    let tau = env
        .tau(&who.type_name)
        .ok_or_else(|| MagiError::UnknownType(who.type_name.clone()))?;
    let scope = AgentScope::new(env, who, percepts, tick, streams, "D");
    let rules = tau
        .decisions
        .iter()
        .map(|d| (&d.action, &d.when))
        .chain(tau.skills.abilities.iter().map(|a| (&a.action, &a.pattern)));
    let mut out: Vec<ActionIntent> = Vec::new();
    for (action, when) in rules {
        if out.iter().any(|i| &i.action == action) {
            continue;
        }
        let fires = eval_bool(when, &scope).map_err(eval_err(format!("decision `{action}` of `{}`", tau.name)))?;
        if !fires {
            continue;
        }
        let Some(spec) = tau.skills.capability(action) else {
            continue;
        };
        let ok = eval_bool(&spec.precondition, &scope)
            .map_err(eval_err(format!("precondition of `{action}` on `{}`", tau.name)))?;
        if ok {
            out.push(ActionIntent::new(action.clone()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgreementOutcome {
    pub commitments: Vec<Commitment>,
    /// Proposals that go ahead: every non-joint one and each paired joint one.
    pub accepted: Vec<(EntityId, ActionIntent)>,
}

/// Pairs proposers of joint actions. For each joint action, proposers whose
/// type declares a pairing for it are taken in id order and matched with
/// the lowest-id unmatched partner within the pairing distance.
pub fn agree(
    env: &Environment,
    proposals: &[(EntityId, ActionIntent)],
    tick: u64,
    first_commitment: u64,
) -> Result<AgreementOutcome, MagiError> {
    let mut out = AgreementOutcome::default();
    let mut joint: BTreeMap<&str, BTreeSet<EntityId>> = BTreeMap::new();
    for (who, intent) in proposals {
        let e = env.entity(*who).ok_or(MagiError::UnknownEntity(*who))?;
        let tau = env
            .tau(&e.type_name)
            .ok_or_else(|| MagiError::UnknownType(e.type_name.clone()))?;
        if tau.is_joint(&intent.action) {
            if tau.agreement_for(&intent.action).is_some() {
                joint.entry(intent.action.as_str()).or_default().insert(*who);
            }
        } else {
            out.accepted.push((*who, intent.clone()));
        }
    }
    let georef = &env.model.georef;
    let mut next_id = first_commitment;
    let mut paired: BTreeSet<(EntityId, &str)> = BTreeSet::new();
    for (action, proposers) in &joint {
        let mut free: Vec<EntityId> = proposers.iter().copied().collect();
        while let Some(a) = free.first().copied() {
            free.remove(0);
            let ea = env.entity(a).expect("checked above");
            let rule = env
                .tau(&ea.type_name)
                .and_then(|t| t.agreement_for(action))
                .expect("filtered above");
            let partner = free.iter().position(|b| {
                let eb = env.entity(*b).expect("checked above");
                georef.distance(&ea.location, &eb.location, georef.default_metric()) <= rule.within
            });
            let Some(pos) = partner else { continue };
            let b = free.remove(pos);
            out.commitments.push(Commitment {
                id: CommitmentId(next_id),
                members: [a, b].into_iter().collect(),
                goal: rule.goal.clone(),
                origin_tick: tick,
            });
            next_id += 1;
            paired.insert((a, action));
            paired.insert((b, action));
        }
    }
    for (who, intent) in proposals {
        if paired.contains(&(*who, intent.action.as_str()))
            && !out.accepted.iter().any(|(w, i)| w == who && i == intent)
        {
            out.accepted.push((*who, intent.clone()));
        }
    }
    out.accepted.sort_by_key(|(w, _)| *w);
    Ok(out)
}

/// Result of applying an agent's accepted actions to its own state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActOutcome {
    pub state: StateValue,
    /// (action, delay) for every `wake` effect.
    pub wakes: Vec<(String, f64)>,
}

/// Applies `intents` in order. Each action's assignments read the state left
/// by the previous action; other entities are read as committed.
pub fn act(
    env: &Environment,
    agent: EntityId,
    intents: &[ActionIntent],
    percepts: &[Percept],
    tick: u64,
    streams: SeedStreams,
) -> Result<ActOutcome, MagiError> {
    let who = env.entity(agent).ok_or(MagiError::UnknownEntity(agent))?;
    let tau = env
        .tau(&who.type_name)
        .ok_or_else(|| MagiError::UnknownType(who.type_name.clone()))?;
    let schema = &env.model.types[&who.type_name].schema;
    let mut state = who.state.clone();
    let mut wakes = Vec::new();
    for intent in intents {
        let spec = tau.skills.capability(&intent.action).ok_or_else(|| MagiError::Eval {
            context: format!("action `{}` of `{}`", intent.action, tau.name),
            source: EvalError::Unbound("capability".into()),
        })?;
        let before = state.clone();
        let scope = AgentScope::new(env, who, percepts, tick, streams, "A").with_state(&before);
        for Assign { target, value } in &spec.effects {
            let v = eval(value, &scope).map_err(eval_err(format!("effect of `{}` on `{target}`", spec.name)))?;
            match schema.get(target) {
                Some(decl) if decl.ty == v.ty() => {
                    state.insert(target.clone(), v);
                }
                Some(decl) => {
                    return Err(MagiError::BadField {
                        ty: tau.name.clone(),
                        field: target.clone(),
                        reason: format!("action `{}` assigns {} to a {} field", spec.name, v.ty(), decl.ty),
                    })
                }
                None => {
                    return Err(MagiError::BadField {
                        ty: tau.name.clone(),
                        field: target.clone(),
                        reason: "not declared".into(),
                    })
                }
            }
        }
        if let Some(delay) = &spec.wake {
            let d = eval_num(delay, &scope).map_err(eval_err(format!("wake delay of `{}`", spec.name)))?;
            wakes.push((spec.name.clone(), d.max(0.0)));
        }
    }
    Ok(ActOutcome { state, wakes })
}

fn run_functions(
    functions: &[Assign],
    local: Option<&ParamMap>,
    global: &ParamMap,
    layer: Option<usize>,
    tick: u64,
    streams: SeedStreams,
) -> Result<ParamMap, MagiError> {
    let mut target = local.unwrap_or(global).clone();
    let rng_owner = ParamScope::owner(layer);
    for (i, Assign { target: name, value }) in functions.iter().enumerate() {
        let scope = ParamScope {
            local: local.map(|_| &target),
            global: if local.is_some() { global } else { &target },
            tick,
            rng: StreamSet::new(streams, rng_owner, tick, "F"),
        };
        let v = eval(value, &scope).map_err(eval_err(format!("function {} (`{name}`)", i + 1)))?;
        match target.get(name) {
            Some(old) if old.ty() != v.ty() => {
                return Err(MagiError::Eval {
                    context: format!("function {} (`{name}`)", i + 1),
                    source: EvalError::TypeMismatch {
                        expected: old.ty(),
                        found: v.ty(),
                        context: format!("parameter `{name}`"),
                    },
                })
            }
            Some(_) => {
                target.insert(name.clone(), v);
            }
            None => {
                return Err(MagiError::Eval {
                    context: format!("function {} (`{name}`)", i + 1),
                    source: EvalError::Unbound(format!("parameter `{name}`")),
                })
            }
        }
    }
    Ok(target)
}

/// Global functions over global parameters, then each layer's functions
/// over its parameters, in declaration order. Entity states are untouched;
/// on error nothing changes.
pub fn apply_global_functions(env: &mut Environment, tick: u64, streams: SeedStreams) -> Result<(), MagiError> {
    let global = run_functions(&env.global_functions, None, &env.global_params, None, tick, streams)?;
    let mut locals = Vec::new();
    for (i, layer) in env.layers().iter().enumerate() {
        locals.push(run_functions(
            &layer.functions,
            Some(&layer.params),
            &global,
            Some(i),
            tick,
            streams,
        )?);
    }
    env.global_params = global;
    let names: Vec<String> = env.layers().iter().map(|l| l.name.clone()).collect();
    for (name, params) in names.iter().zip(locals) {
        env.layer_mut(name).expect("layer listed").params = params;
    }
    Ok(())
}
