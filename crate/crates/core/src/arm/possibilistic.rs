//! Possibilistic goal election.
//!
//! Beliefs are a possibility distribution π over a finite set of worlds.
//! Desire rules justify desires; the elected goal set G* is the consistent
//! subset of justified desires with the highest possibility measure
//! Π(S) = max{π(w) : w satisfies every goal in S}.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::state::GoalId;
use crate::rule::{EvalError, Expr};
use crate::value::Value;

pub const NORMALIZATION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct World {
    pub pi: f64,
    /// Fact values assumed true in this world; they shadow beliefs of the same name.
    pub facts: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesireRule {
    pub guard: Expr,
    pub goal: GoalId,
}

/// New information: the set of worlds compatible with it.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoRecord {
    pub name: String,
    pub worlds: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PossibilisticState {
    pub worlds: BTreeMap<String, World>,
    #[serde(skip)]
    pub desire_rules: Vec<DesireRule>,
    pub last_info: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PossibilisticError {
    #[error("possibility distribution is not normalized (max π = {0})")]
    Unnormalized(f64),
    #[error("information `{0}` is incompatible with every world")]
    Contradiction(String),
    #[error("information `{info}` names unknown world `{world}`")]
    UnknownWorld { info: String, world: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Election {
    /// Justified desires (J).
    pub justified: BTreeSet<GoalId>,
    /// Elected goals (G*).
    pub elected: BTreeSet<GoalId>,
    /// Π(G*).
    pub pi_value: f64,
}

impl PossibilisticState {
    pub fn max_pi(&self) -> f64 {
        self.worlds.values().map(|w| w.pi).fold(0.0, f64::max)
    }

    pub fn is_normalized(&self) -> bool {
        (self.max_pi() - 1.0).abs() <= NORMALIZATION_EPS
    }
}

/// Elects goals among `candidates`.
///
/// `fires` decides whether a desire rule's guard holds under current
/// beliefs; `satisfies` whether a goal's condition holds in a world.
/// G* ranges over non-empty consistent subsets of J; it is empty, with
/// Π = 1, only when no such subset exists. Ties prefer more goals, then
/// the lexicographically smallest id sequence.
pub fn elect_goals<F, S>(
    ps: &PossibilisticState,
    candidates: &BTreeSet<GoalId>,
    mut fires: F,
    mut satisfies: S,
) -> Result<Election, PossibilisticError>
where
    F: FnMut(&DesireRule) -> Result<bool, EvalError>,
    S: FnMut(&GoalId, &World) -> Result<bool, EvalError>,
{
    if !ps.is_normalized() {
        return Err(PossibilisticError::Unnormalized(ps.max_pi()));
    }
    let mut justified = BTreeSet::new();
    for rule in &ps.desire_rules {
        if candidates.contains(&rule.goal) && !justified.contains(&rule.goal) && fires(rule)? {
            justified.insert(rule.goal.clone());
        }
    }
    let mut best: Option<(f64, BTreeSet<GoalId>)> = None;
    for world in ps.worlds.values().filter(|w| w.pi > 0.0) {
        let mut sat = BTreeSet::new();
        for g in &justified {
            if satisfies(g, world)? {
                sat.insert(g.clone());
            }
        }
        if sat.is_empty() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((pi, set)) => {
                world.pi > *pi || (world.pi == *pi && (sat.len() > set.len() || (sat.len() == set.len() && sat < *set)))
            }
        };
        if better {
            best = Some((world.pi, sat));
        }
    }
    let (pi_value, elected) = best.unwrap_or((1.0, BTreeSet::new()));
    Ok(Election {
        justified,
        elected,
        pi_value,
    })
}

/// Zeroes worlds outside `info` and renormalizes so that max π = 1.
pub fn revise_possibility(
    ps: &PossibilisticState,
    info: &InfoRecord,
) -> Result<PossibilisticState, PossibilisticError> {
    if let Some(w) = info.worlds.iter().find(|w| !ps.worlds.contains_key(*w)) {
        return Err(PossibilisticError::UnknownWorld {
            info: info.name.clone(),
            world: w.clone(),
        });
    }
    let mut next = ps.clone();
    for (name, world) in &mut next.worlds {
        if !info.worlds.contains(name) {
            world.pi = 0.0;
        }
    }
    let max = next.max_pi();
    if max <= 0.0 {
        return Err(PossibilisticError::Contradiction(info.name.clone()));
    }
    for world in next.worlds.values_mut() {
        world.pi /= max;
    }
    next.last_info = Some(info.name.clone());
    Ok(next)
}
