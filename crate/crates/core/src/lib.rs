//! Agent-based geosimulation engine.
//!
//! Geographic automata ([`gas`]) live inside a layered environment
//! ([`magi`]) and are advanced by a discrete-event scheduler ([`devs`]).
//! Agents carry a reference-model internal state ([`arm`]) and reason
//! through a perception, memory, planning and action pipeline ([`minds`])
//! whose planner can be rule based, scripted, or an external text model.
//! Scenarios are written in a small block language ([`dsl`]) and compiled
//! into runnable models ([`engine`]). [`conformance`] reports which
//! reference-model concepts an architecture or a scenario covers.

pub mod arm;
pub mod conformance;
pub mod devs;
pub mod dsl;
pub mod engine;
pub mod gas;
pub mod ids;
pub mod magi;
pub mod minds;
pub mod percept;
pub mod rng;
pub mod rule;
pub mod value;

pub use ids::{AutomatonId, EntityId};
pub use rng::SeedStreams;
pub use value::{ParamMap, StateValue, Ty, Value};
