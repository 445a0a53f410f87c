use std::collections::BTreeSet;

use super::MethodologyProfile;
use crate::arm::GoalKind;
use crate::dsl::{ScenarioDoc, TypeDecl};

fn type_concepts(t: &TypeDecl, out: &mut BTreeSet<&'static str>) {
    let mut mark = |present: bool, id: &'static str| {
        if present {
            out.insert(id);
        }
    };
    let possibilistic = t.possibilistic.as_ref();
    mark(!t.perception.is_empty() || possibilistic.is_some(), "beliefs");
    mark(!t.goals.is_empty(), "goals");
    mark(
        t.goals.iter().any(|g| g.kind == GoalKind::Maintenance),
        "goals.maintenance",
    );
    mark(
        t.goals.iter().any(|g| g.kind == GoalKind::Achievement),
        "goals.achievement",
    );
    mark(t.intentions.is_some(), "intention");
    mark(!t.preferences.is_empty() || possibilistic.is_some(), "preference");
    mark(!t.agreements.is_empty() || t.commitment_bonus.is_some(), "commitments");
    mark(!t.plans.is_empty(), "plan");
    mark(t.mind.as_ref().is_some_and(|m| m.memory.is_some()), "history");
    mark(possibilistic.is_some_and(|p| !p.infos.is_empty()), "dynamics.update");
    mark(t.activation.is_some(), "dynamics.activation");
    mark(
        t.mind.as_ref().is_some_and(|m| m.backend.is_some()),
        "dynamics.planning",
    );
    mark(!t.roles.is_empty(), "roles");
    mark(!t.use_cases.is_empty(), "use_case");
    mark(!t.abilities.is_empty(), "skills.abilities");
    mark(!t.actions.is_empty(), "skills.capabilities");
}

/// The concepts a scenario exercises, over all its types. A concept counts
/// when some type declares a nonempty block for it:
///
/// | concept | block |
/// |---|---|
/// | beliefs | `perception` or `possibilistic` |
/// | goals, goals.maintenance, goals.achievement | `goal`, split by kind |
/// | intention | `intentions` |
/// | preference | `preference` or `possibilistic` |
/// | commitments | `agreement` or `commitment_bonus` |
/// | plan | `plan` |
/// | history | `mind { memory }` |
/// | dynamics.update | `possibilistic { info }` |
/// | dynamics.activation | `activation` |
/// | dynamics.planning | `mind { backend }` |
/// | roles, use_case, skills.abilities | `role`, `use_case`, `ability` |
/// | skills.capabilities | `action` |
///
/// `plan.maintenance` is never marked.
pub fn profile_from_scenario(doc: &ScenarioDoc) -> MethodologyProfile {
    let mut covered = BTreeSet::new();
    for t in &doc.types {
        type_concepts(t, &mut covered);
    }
    MethodologyProfile::new("scenario", covered).expect("scenario concepts are reference-model concepts")
}
