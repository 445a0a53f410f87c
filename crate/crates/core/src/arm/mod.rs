//! Agent reference model: internal state, internal dynamics, skills and roles.

mod dynamics;
mod possibilistic;
mod state;

pub use dynamics::{
    activate, emit_step, goal_conditions, plan_and_execute, record_history, refresh_goals, select_intentions,
    update_beliefs, validate_steps, Activation, ActivationEvent, ArmError, PlanLibrary, PlanSource, PlanningError,
};
pub use possibilistic::{
    elect_goals, revise_possibility, DesireRule, Election, InfoRecord, PossibilisticError, PossibilisticState, World,
    NORMALIZATION_EPS,
};
pub use state::{
    Ability, ActionIntent, ActionSpec, AgentInternalState, Belief, Commitment, CommitmentId, Goal, GoalId, GoalKind,
    HistoryRecord, Plan, PlanId, RoleSpec, SkillSet, DEFAULT_COMMITMENT_BONUS,
};
