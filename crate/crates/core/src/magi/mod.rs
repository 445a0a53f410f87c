//! Layered environment: global parameters and functions, layers of
//! entities, entity types with perception, decision and agreement
//! functions, and entity lifecycle.

mod env;
mod ops;
mod scope;
mod types;

pub use env::{Entity, EntitySpec, Environment, Layer, MagiError};
pub use ops::{act, agree, apply_global_functions, decide, perceive, ActOutcome, AgreementOutcome};
pub use scope::{AgentScope, ParamScope};
pub use types::{AgentTypeTau, AgreementFn, DecisionFn, EntityKind, PerceptionFn, PossibilisticSpec, Shape};
