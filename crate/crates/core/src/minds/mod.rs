//! Generative-agent pipeline: perception to text, memory, planning, action.
//!
//! The planner is pluggable. `rule_based` and `scripted` backends are fully
//! deterministic; `external` talks JSON lines to a child process and
//! records every exchange so a run can be replayed as a transcript.

mod backend;
mod config;
mod memory;
mod observation;
mod pipeline;
mod transport;

use thiserror::Error;

pub use backend::{parse_plan_text, plan_prompt, ExternalBackend, MindBackend, Production};
pub use config::{BackendSpec, MindSpec};
pub use memory::{MemoryRecord, MemoryStore, PlanRecord, QuerySpec, RetrievalWeights, Retrieved};
pub use observation::{
    perceive_text, ObservationRecord, TemplateSet, ENTITY_TEMPLATE, NOTHING_OBSERVED, PARAM_TEMPLATE,
};
pub use pipeline::{act, AgentMind, MindPlanner, DEFAULT_RETRIEVE};
pub use transport::{
    exchanges_to_jsonl, Exchange, MindRequest, MindResponse, Mode, ProcessTransport, Transcript, Transport,
    TransportError, DEFAULT_TIMEOUT, MIND_CMD_ENV,
};

use crate::arm::PlanningError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MindError {
    #[error("no template for percept kind `{0}`")]
    MissingTemplate(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Planning(#[from] PlanningError),
}
