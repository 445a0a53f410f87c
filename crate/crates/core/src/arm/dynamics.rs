use std::collections::BTreeMap;

use thiserror::Error;

use super::state::{ActionIntent, AgentInternalState, Belief, Goal, GoalId, GoalKind, HistoryRecord, Plan, SkillSet};
use crate::percept::Percept;
use crate::rule::{eval_bool, EvalError, Scope};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArmError {
    #[error("history tick {tick} does not follow {last}")]
    NonIncreasingTick { tick: u64, last: u64 },
    #[error("planning failed: {0}")]
    Planning(#[from] PlanningError),
    #[error("precondition of `{action}`: {source}")]
    Precondition { action: String, source: EvalError },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("mind backend: {0}")]
    Backend(String),
    #[error("cannot parse plan: {0}")]
    Unparseable(String),
    #[error("plan step `{0}` is not a capability of this agent")]
    UnknownAction(String),
}

/// Produces plans for intentions that have none.
pub trait PlanSource {
    /// Steps for `goal`, or `None` when the source has nothing to offer.
    fn synthesize(&mut self, goal: &Goal, skills: &SkillSet, tick: u64) -> Result<Option<Vec<String>>, PlanningError>;
}

/// A plan library: fixed step lists per goal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanLibrary {
    pub plans: BTreeMap<GoalId, Vec<String>>,
}

impl PlanSource for PlanLibrary {
    fn synthesize(&mut self, goal: &Goal, _: &SkillSet, _: u64) -> Result<Option<Vec<String>>, PlanningError> {
        Ok(self.plans.get(&goal.id).cloned())
    }
}

/// Rejects plans naming actions outside the capability set.
pub fn validate_steps(steps: &[String], skills: &SkillSet) -> Result<(), PlanningError> {
    match steps.iter().find(|s| skills.capability(s).is_none()) {
        Some(bad) => Err(PlanningError::UnknownAction(bad.clone())),
        None => Ok(()),
    }
}

/// Most-recent-wins overwrite of every key the percepts assert.
pub fn update_beliefs(state: &AgentInternalState, percepts: &[Percept], tick: u64) -> AgentInternalState {
    let mut next = state.clone();
    for p in percepts {
        for (key, value) in p.belief_entries() {
            next.beliefs.insert(key, Belief { value, tick });
        }
    }
    next
}

/// Everything `activate` needs to know about the current tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivationEvent {
    pub tick: u64,
    /// A scheduled wake-up or other event addressed to this agent.
    pub addressed: bool,
    /// The type's activation trigger evaluated this tick.
    pub trigger: bool,
    /// Whether each goal's condition currently holds.
    pub conditions: BTreeMap<GoalId, bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Run,
    Skip,
}

pub fn activate(state: &AgentInternalState, event: &ActivationEvent) -> Activation {
    let unmet = |g: &Goal| g.active && !event.conditions.get(&g.id).copied().unwrap_or(false);
    if event.addressed || event.trigger || state.has_pending_step() || state.goals.iter().any(unmet) {
        Activation::Run
    } else {
        Activation::Skip
    }
}

/// Evaluates every goal condition under `scope`.
pub fn goal_conditions(state: &AgentInternalState, scope: &dyn Scope) -> Result<BTreeMap<GoalId, bool>, EvalError> {
    state
        .goals
        .iter()
        .map(|g| Ok((g.id.clone(), eval_bool(&g.condition, scope)?)))
        .collect()
}

/// Discharges achieved achievement goals together with their plans,
/// intentions and commitments. Maintenance goals are left alone.
pub fn refresh_goals(state: &AgentInternalState, conditions: &BTreeMap<GoalId, bool>) -> AgentInternalState {
    let mut next = state.clone();
    let mut done = Vec::new();
    for g in &mut next.goals {
        if g.active && g.kind == GoalKind::Achievement && conditions.get(&g.id).copied().unwrap_or(false) {
            g.active = false;
            done.push(g.id.clone());
        }
    }
    next.plans.retain(|_, p| !done.contains(&p.goal));
    next.intentions.retain(|i| !done.contains(i));
    next.commitments.retain(|c| !done.contains(&c.goal));
    next
}

fn utility(state: &AgentInternalState, goal: &GoalId) -> f64 {
    let base = state.preferences.get(goal).copied().unwrap_or(0.0);
    if state.is_committed(goal) {
        base + state.commitment_bonus
    } else {
        base
    }
}

/// The `max_k` active goals of highest utility, best first; ties by goal id.
pub fn select_intentions(state: &AgentInternalState, max_k: usize) -> Vec<GoalId> {
    let mut ranked: Vec<(f64, &GoalId)> = state
        .goals
        .iter()
        .filter(|g| g.active)
        .map(|g| (utility(state, &g.id), &g.id))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    ranked.into_iter().take(max_k).map(|(_, id)| id.clone()).collect()
}

/// Advances the agent's plans by at most one step each.
///
/// Exhausted plans are dropped. Intentions without a plan get one from
/// `source`, except maintenance goals whose condition already holds.
/// A step is emitted when its capability precondition holds under
/// `scope`, and only then does its cursor move.
pub fn plan_and_execute(
    state: &AgentInternalState,
    skills: &SkillSet,
    scope: &dyn Scope,
    source: &mut dyn PlanSource,
    conditions: &BTreeMap<GoalId, bool>,
    tick: u64,
) -> Result<(AgentInternalState, Vec<ActionIntent>), ArmError> {
    let mut next = state.clone();
    next.plans.retain(|_, p| !p.is_exhausted());
    for intention in &state.intentions {
        if next.plan_for(intention).is_some() {
            continue;
        }
        let Some(goal) = next.goal(intention).cloned() else {
            continue;
        };
        if goal.kind == GoalKind::Maintenance && conditions.get(&goal.id).copied().unwrap_or(false) {
            continue;
        }
        if let Some(steps) = source.synthesize(&goal, skills, tick)? {
            validate_steps(&steps, skills)?;
            if !steps.is_empty() {
                next.add_plan(goal.id.clone(), steps);
            }
        }
    }
    let mut intents = Vec::new();
    for intention in &state.intentions {
        let Some(plan) = next.plans.values_mut().find(|p| &p.goal == intention) else {
            continue;
        };
        if let Some(intent) = emit_step(plan, skills, scope)? {
            intents.push(intent);
            plan.cursor += 1;
        }
    }
    Ok((next, intents))
}

/// The plan's cursor step, if its capability precondition holds under `scope`.
pub fn emit_step(plan: &Plan, skills: &SkillSet, scope: &dyn Scope) -> Result<Option<ActionIntent>, ArmError> {
    let Some(step) = plan.next_step() else {
        return Ok(None);
    };
    let spec = skills
        .capability(step)
        .ok_or_else(|| PlanningError::UnknownAction(step.to_string()))?;
    let holds = eval_bool(&spec.precondition, scope).map_err(|source| ArmError::Precondition {
        action: spec.name.clone(),
        source,
    })?;
    Ok(holds.then(|| ActionIntent {
        action: spec.name.clone(),
        goal: Some(plan.goal.clone()),
    }))
}

pub fn record_history(
    state: &AgentInternalState,
    percepts: Vec<Percept>,
    actions: Vec<ActionIntent>,
    tick: u64,
) -> Result<AgentInternalState, ArmError> {
    if let Some(last) = state.last_history_tick() {
        if tick <= last {
            return Err(ArmError::NonIncreasingTick { tick, last });
        }
    }
    let mut next = state.clone();
    next.history.push(HistoryRecord {
        tick,
        percepts,
        actions,
    });
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::state::ActionSpec;
    use crate::gas::Location;
    use crate::rule::{Attr, Expr, Member, Source};
    use crate::value::Value;

    struct Flags(BTreeMap<String, Value>);

    impl Scope for Flags {
        fn tick(&self) -> u64 {
            0
        }
        fn param(&self, name: &str) -> Option<Value> {
            self.0.get(name).cloned()
        }
        fn self_attr(&self, _: &Attr) -> Option<Value> {
            None
        }
        fn members(&self, _: Source) -> Result<Vec<Member<'_>>, EvalError> {
            Ok(Vec::new())
        }
        fn draw(&self, _: &str) -> Result<f64, EvalError> {
            Ok(0.0)
        }
    }

    fn goal(id: &str, kind: GoalKind) -> Goal {
        Goal::new(id, kind, Expr::boolean(false))
    }

    fn door(v: &str) -> Percept {
        Percept::Param {
            name: "door".into(),
            value: Value::sym(v),
        }
    }

    #[test]
    fn beliefs_most_recent_wins() {
        let s = AgentInternalState::default();
        assert_eq!(update_beliefs(&s, &[], 3), s);
        let s = update_beliefs(&s, &[door("closed")], 1);
        let s = update_beliefs(&s, &[door("open")], 2);
        assert_eq!(
            s.beliefs["door"],
            Belief {
                value: Value::sym("open"),
                tick: 2
            }
        );
        let s = update_beliefs(
            &s,
            &[Percept::Param {
                name: "light".into(),
                value: Value::Bool(true),
            }],
            3,
        );
        assert_eq!(s.beliefs.len(), 2);
        assert_eq!(s.beliefs["door"].tick, 2);
    }

    #[test]
    fn entity_percepts_become_keyed_beliefs() {
        let p = Percept::Entity {
            source: crate::EntityId(7),
            kind: "tree".into(),
            distance: 2.0,
            location: Location::Cell(1, 1),
            state: [("height".to_string(), Value::Num(3.0))].into_iter().collect(),
        };
        let s = update_beliefs(&AgentInternalState::default(), &[p], 1);
        assert_eq!(s.belief("7.height"), Some(&Value::Num(3.0)));
        assert_eq!(s.belief("7.type"), Some(&Value::sym("tree")));
        assert_eq!(s.belief("7.distance"), Some(&Value::Num(2.0)));
    }

    #[test]
    fn activation_cases() {
        let mut s = AgentInternalState::new(vec![goal("safe", GoalKind::Maintenance)], BTreeMap::new());
        let mut ev = ActivationEvent::default();
        ev.conditions.insert(GoalId::new("safe"), false);
        assert_eq!(activate(&s, &ev), Activation::Run);
        ev.conditions.insert(GoalId::new("safe"), true);
        assert_eq!(activate(&s, &ev), Activation::Skip);

        let empty = AgentInternalState::default();
        assert_eq!(activate(&empty, &ActivationEvent::default()), Activation::Skip);

        s.add_plan(GoalId::new("safe"), vec!["look".into()]);
        assert_eq!(activate(&s, &ev), Activation::Run);
        let addressed = ActivationEvent {
            addressed: true,
            ..ActivationEvent::default()
        };
        assert_eq!(activate(&empty, &addressed), Activation::Run);
    }

    #[test]
    fn intention_ranking() {
        let goals = vec![goal("a", GoalKind::Achievement), goal("b", GoalKind::Achievement)];
        let prefs = [(GoalId::new("a"), 0.9), (GoalId::new("b"), 0.5)].into_iter().collect();
        let s = AgentInternalState::new(goals.clone(), prefs);
        assert!(select_intentions(&s, 0).is_empty());
        assert_eq!(select_intentions(&s, 1), vec![GoalId::new("a")]);

        let prefs = [(GoalId::new("a"), 0.5), (GoalId::new("b"), 0.5)].into_iter().collect();
        let mut s = AgentInternalState::new(goals, prefs);
        assert_eq!(select_intentions(&s, 1), vec![GoalId::new("a")]);

        s.commit(crate::arm::Commitment {
            id: crate::arm::CommitmentId(0),
            members: Default::default(),
            goal: GoalId::new("b"),
            origin_tick: 0,
        });
        assert_eq!(select_intentions(&s, 1), vec![GoalId::new("b")]);
    }

    #[test]
    fn achievement_discharges_but_maintenance_persists() {
        let s = AgentInternalState::new(
            vec![goal("won", GoalKind::Achievement), goal("safe", GoalKind::Maintenance)],
            BTreeMap::new(),
        );
        let all_true = [(GoalId::new("won"), true), (GoalId::new("safe"), true)]
            .into_iter()
            .collect();
        let next = refresh_goals(&s, &all_true);
        assert!(!next.goals[0].active);
        assert!(next.goals[1].active);
    }

    fn skills(pre_b: Expr) -> SkillSet {
        let mut caps = BTreeMap::new();
        caps.insert("a".into(), ActionSpec::new("a", Expr::boolean(true), vec![]));
        caps.insert("b".into(), ActionSpec::new("b", pre_b, vec![]));
        SkillSet {
            abilities: vec![],
            capabilities: caps,
        }
    }

    fn planned_state() -> AgentInternalState {
        let mut s = AgentInternalState::new(vec![goal("g", GoalKind::Achievement)], BTreeMap::new());
        s.intentions = vec![GoalId::new("g")];
        s
    }

    #[test]
    fn plan_steps_emitted_in_order() {
        let sk = skills(Expr::boolean(true));
        let mut lib = PlanLibrary::default();
        lib.plans.insert(GoalId::new("g"), vec!["a".into(), "b".into()]);
        let scope = Flags(BTreeMap::new());
        let none = BTreeMap::new();
        let (s1, out1) = plan_and_execute(&planned_state(), &sk, &scope, &mut lib, &none, 1).unwrap();
        assert_eq!(
            out1,
            vec![ActionIntent {
                action: "a".into(),
                goal: Some(GoalId::new("g"))
            }]
        );
        assert_eq!(s1.plan_for(&GoalId::new("g")).unwrap().cursor, 1);
        let (s2, out2) = plan_and_execute(&s1, &sk, &scope, &mut lib, &none, 2).unwrap();
        assert_eq!(out2[0].action, "b");
        assert_eq!(s2.plan_for(&GoalId::new("g")).unwrap().cursor, 2);
    }

    #[test]
    fn false_precondition_freezes_cursor() {
        let sk = skills(Expr::param("ready"));
        let mut lib = PlanLibrary::default();
        lib.plans.insert(GoalId::new("g"), vec!["b".into()]);
        let scope = Flags([("ready".to_string(), Value::Bool(false))].into_iter().collect());
        let (s, out) = plan_and_execute(&planned_state(), &sk, &scope, &mut lib, &BTreeMap::new(), 1).unwrap();
        assert!(out.is_empty());
        assert_eq!(s.plan_for(&GoalId::new("g")).unwrap().cursor, 0);
    }

    #[test]
    fn no_intentions_no_actions() {
        let s = AgentInternalState::new(vec![goal("g", GoalKind::Achievement)], BTreeMap::new());
        let mut lib = PlanLibrary::default();
        let (next, out) = plan_and_execute(
            &s,
            &skills(Expr::boolean(true)),
            &Flags(BTreeMap::new()),
            &mut lib,
            &BTreeMap::new(),
            1,
        )
        .unwrap();
        assert!(out.is_empty());
        assert_eq!(next, s);
    }

    #[test]
    fn unknown_plan_step_rejected() {
        let mut lib = PlanLibrary::default();
        lib.plans.insert(GoalId::new("g"), vec!["fly".into()]);
        let err = plan_and_execute(
            &planned_state(),
            &skills(Expr::boolean(true)),
            &Flags(BTreeMap::new()),
            &mut lib,
            &BTreeMap::new(),
            1,
        )
        .unwrap_err();
        assert_eq!(err, ArmError::Planning(PlanningError::UnknownAction("fly".into())));
    }

    #[test]
    fn history_ticks_strictly_increase() {
        let s = record_history(&AgentInternalState::default(), vec![], vec![], 0).unwrap();
        assert_eq!(s.history.len(), 1);
        assert!(matches!(
            record_history(&s, vec![], vec![], 0),
            Err(ArmError::NonIncreasingTick { .. })
        ));
        let s = record_history(&s, vec![], vec![], 1).unwrap();
        let s = record_history(&s, vec![], vec![], 2).unwrap();
        assert_eq!(s.history.iter().map(|h| h.tick).collect::<Vec<_>>(), vec![0, 1, 2]);
    }
}
