use super::backend::Production;
use super::memory::RetrievalWeights;
use super::observation::TemplateSet;
use super::pipeline::DEFAULT_RETRIEVE;

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    RuleBased(Vec<Production>),
    /// Transcript file in exchange-log format.
    Scripted {
        path: String,
    },
    External {
        command: String,
        /// Separate command for the perception mode, if any.
        perceive: Option<String>,
    },
}

impl BackendSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendSpec::RuleBased(_) => "rule_based",
            BackendSpec::Scripted { .. } => "scripted",
            BackendSpec::External { .. } => "external",
        }
    }
}

/// A type's mind declaration; each agent of the type gets its own memory.
#[derive(Debug, Clone, PartialEq)]
pub struct MindSpec {
    pub backend: BackendSpec,
    pub capacity: Option<usize>,
    pub retrieve: usize,
    pub weights: RetrievalWeights,
    /// Extra templates layered over the standard ones.
    pub templates: Vec<(String, String)>,
}

impl MindSpec {
    pub fn new(backend: BackendSpec) -> Self {
        Self {
            backend,
            capacity: None,
            retrieve: DEFAULT_RETRIEVE,
            weights: RetrievalWeights::default(),
            templates: Vec::new(),
        }
    }

    pub fn template_set(&self) -> TemplateSet {
        let mut t = TemplateSet::standard();
        for (kind, text) in &self.templates {
            t.insert(kind, text);
        }
        t
    }
}
