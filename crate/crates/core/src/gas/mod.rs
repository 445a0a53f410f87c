//! Geographic Automata Systems: typed automata with states, locations and
//! neighborhoods evolving under transition, movement and neighborhood rules.

mod georef;
mod index;
mod kernel;
mod model;

pub use georef::{Boundary, GeoError, GeoRefConvention, Location, Metric, NeighborhoodSpec};
pub use index::SpatialIndex;
pub use kernel::{
    neighbors_by_convention, step, GasEval, NeighborhoodView, NoParams, ParamLookup, RuleError, StepError,
};
pub use model::{
    referenced_types, AutomatonRecord, AutomatonType, FieldDecl, GasModel, GasSnapshot, ModelError, Rule, StateSchema,
    IDENTITY_TRANSITION, STATIC_NEIGHBORHOOD, STAY_MOVEMENT,
};
