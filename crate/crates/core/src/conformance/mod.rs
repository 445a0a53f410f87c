//! Agent reference model concept coverage.
//!
//! A [`MethodologyProfile`] names the reference-model concepts an agent
//! architecture provides. [`matrix`] lays several profiles side by side as
//! a concept-by-methodology table; the nine shipped profiles reproduce the
//! published comparison of agent-oriented methodologies.
//!
//! Coverage is literal: a child concept such as `goals.achievement` never
//! implies its parent `goals`, and the reverse does not hold either.

mod render;
mod scenario;

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

pub use scenario::profile_from_scenario;

#[derive(Debug, Error, PartialEq)]
pub enum ConformanceError {
    #[error("profile `{profile}` names unknown concept `{concept}`")]
    UnknownConcept { profile: String, concept: String },
    #[error("profile name is empty")]
    EmptyName,
    #[error("duplicate profile `{0}`")]
    DuplicateProfile(String),
    #[error("no shipped profile named `{0}`")]
    UnknownProfile(String),
    #[error("malformed profile: {0}")]
    Toml(String),
}

/// The four top-level parts of the reference model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConceptGroup {
    InternalState,
    InternalDynamics,
    ExternalState,
    Interface,
}

impl ConceptGroup {
    pub fn id(self) -> &'static str {
        match self {
            ConceptGroup::InternalState => "internal_state",
            ConceptGroup::InternalDynamics => "internal_dynamics",
            ConceptGroup::ExternalState => "external_state",
            ConceptGroup::Interface => "interface",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ConceptGroup::InternalState => "Internal state",
            ConceptGroup::InternalDynamics => "Internal dynamics",
            ConceptGroup::ExternalState => "External state",
            ConceptGroup::Interface => "Interface",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArmConcept {
    pub id: &'static str,
    pub group: ConceptGroup,
    /// Row label in the rendered table.
    pub label: &'static str,
}

const fn concept(id: &'static str, group: ConceptGroup, label: &'static str) -> ArmConcept {
    ArmConcept { id, group, label }
}

/// Every reference-model concept, in table row order.
///
/// `plan.maintenance` is listed because the published table has the row,
/// but nothing defines what plan maintenance means. Profiles can mark it;
/// the agent runtime has no behaviour behind it.
pub const CONCEPTS: [ArmConcept; 17] = {
    use ConceptGroup::*;
    [
        concept("beliefs", InternalState, "Beliefs"),
        concept("goals", InternalState, "Goals"),
        concept("goals.maintenance", InternalState, "  maintenance"),
        concept("goals.achievement", InternalState, "  achievement"),
        concept("intention", InternalState, "Intention"),
        concept("preference", InternalState, "Preference"),
        concept("commitments", InternalState, "Commitments"),
        concept("plan", InternalState, "Plan"),
        concept("plan.maintenance", InternalState, "  maintenance"),
        concept("history", InternalState, "History"),
        concept("dynamics.update", InternalDynamics, "Update mechanism"),
        concept("dynamics.activation", InternalDynamics, "Activation mechanism"),
        concept("dynamics.planning", InternalDynamics, "Planning mechanism"),
        concept("roles", ExternalState, "Roles"),
        concept("use_case", ExternalState, "Use case"),
        concept("skills.abilities", Interface, "  abilities"),
        concept("skills.capabilities", Interface, "  capabilities"),
    ]
};

pub fn concept_by_id(id: &str) -> Option<&'static ArmConcept> {
    CONCEPTS.iter().find(|c| c.id == id)
}

/// Which concepts an architecture covers, with optional per-concept notes.
/// Construction rejects concept ids outside [`CONCEPTS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodologyProfile {
    name: String,
    covered: BTreeSet<String>,
    notes: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    #[serde(default)]
    covered: Vec<String>,
    #[serde(default)]
    notes: BTreeMap<String, String>,
}

impl MethodologyProfile {
    pub fn new<I, S>(name: &str, covered: I) -> Result<Self, ConformanceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_notes(name, covered, BTreeMap::new())
    }

    pub fn with_notes<I, S>(name: &str, covered: I, notes: BTreeMap<String, String>) -> Result<Self, ConformanceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if name.trim().is_empty() {
            return Err(ConformanceError::EmptyName);
        }
        let covered: BTreeSet<String> = covered.into_iter().map(Into::into).collect();
        for id in covered.iter().chain(notes.keys()) {
            if concept_by_id(id).is_none() {
                return Err(ConformanceError::UnknownConcept {
                    profile: name.to_string(),
                    concept: id.clone(),
                });
            }
        }
        Ok(Self {
            name: name.to_string(),
            covered,
            notes,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConformanceError> {
        let file: ProfileFile = toml::from_str(text).map_err(|e| ConformanceError::Toml(e.to_string()))?;
        Self::with_notes(&file.name, file.covered, file.notes)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn covered(&self) -> &BTreeSet<String> {
        &self.covered
    }

    pub fn notes(&self) -> &BTreeMap<String, String> {
        &self.notes
    }

    pub fn covers(&self, id: &str) -> bool {
        self.covered.contains(id)
    }

    pub fn renamed(mut self, name: &str) -> Result<Self, ConformanceError> {
        if name.trim().is_empty() {
            return Err(ConformanceError::EmptyName);
        }
        self.name = name.to_string();
        Ok(self)
    }
}

const SHIPPED: [(&str, &str); 9] = [
    ("aaii", include_str!("../../fixtures/profiles/aaii.toml")),
    ("gaia", include_str!("../../fixtures/profiles/gaia.toml")),
    ("mase", include_str!("../../fixtures/profiles/mase.toml")),
    ("prometheus", include_str!("../../fixtures/profiles/prometheus.toml")),
    ("message_uml", include_str!("../../fixtures/profiles/message_uml.toml")),
    ("ingenias", include_str!("../../fixtures/profiles/ingenias.toml")),
    ("tropos", include_str!("../../fixtures/profiles/tropos.toml")),
    (
        "mas_commonskads",
        include_str!("../../fixtures/profiles/mas_commonskads.toml"),
    ),
    ("o_mase", include_str!("../../fixtures/profiles/o_mase.toml")),
];

/// The methodology comparison table as checked in, in canonical CSV.
pub const TABLE1_CSV: &str = include_str!("../../fixtures/table1.csv");

/// The nine methodology profiles, in table column order.
pub fn shipped_profiles() -> Vec<MethodologyProfile> {
    SHIPPED
        .iter()
        .map(|(key, text)| MethodologyProfile::from_toml(text).unwrap_or_else(|e| panic!("shipped profile {key}: {e}")))
        .collect()
}

/// A shipped profile by display name or file key, ignoring case.
pub fn shipped_profile(name: &str) -> Result<MethodologyProfile, ConformanceError> {
    let wanted = name.to_ascii_lowercase();
    SHIPPED
        .iter()
        .zip(shipped_profiles())
        .find(|((key, _), p)| *key == wanted || p.name().to_ascii_lowercase() == wanted)
        .map(|(_, p)| p)
        .ok_or_else(|| ConformanceError::UnknownProfile(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mark {
    Covered,
    Uncovered,
    /// A noted cell; `covered` says whether it also carries a mark.
    Annotated {
        covered: bool,
        note: String,
    },
}

impl Mark {
    pub fn is_covered(&self) -> bool {
        matches!(self, Mark::Covered | Mark::Annotated { covered: true, .. })
    }
}

/// One profile's marks, aligned with [`CONCEPTS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageRow {
    pub profile: String,
    pub marks: Vec<Mark>,
}

impl CoverageRow {
    pub fn mark(&self, concept: &str) -> Option<&Mark> {
        CONCEPTS.iter().position(|c| c.id == concept).map(|i| &self.marks[i])
    }

    pub fn covered_ids(&self) -> BTreeSet<&'static str> {
        CONCEPTS
            .iter()
            .zip(&self.marks)
            .filter(|(_, m)| m.is_covered())
            .map(|(c, _)| c.id)
            .collect()
    }
}

pub fn check_coverage(profile: &MethodologyProfile) -> CoverageRow {
    let marks = CONCEPTS
        .iter()
        .map(|c| {
            let covered = profile.covers(c.id);
            match profile.notes.get(c.id) {
                Some(note) => Mark::Annotated {
                    covered,
                    note: note.clone(),
                },
                None if covered => Mark::Covered,
                None => Mark::Uncovered,
            }
        })
        .collect();
    CoverageRow {
        profile: profile.name.clone(),
        marks,
    }
}

/// Concepts down, profiles across.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageMatrix {
    pub columns: Vec<CoverageRow>,
}

pub fn matrix(profiles: &[MethodologyProfile]) -> Result<CoverageMatrix, ConformanceError> {
    let mut seen = BTreeSet::new();
    for p in profiles {
        if !seen.insert(p.name()) {
            return Err(ConformanceError::DuplicateProfile(p.name().to_string()));
        }
    }
    Ok(CoverageMatrix {
        columns: profiles.iter().map(check_coverage).collect(),
    })
}

impl CoverageMatrix {
    pub fn cell(&self, concept: &str, profile: &str) -> Option<&Mark> {
        self.columns.iter().find(|c| c.profile == profile)?.mark(concept)
    }

    /// Distinct note texts with their footnote symbols, in reading order.
    pub fn footnotes(&self) -> Vec<(String, &str)> {
        let mut notes: Vec<&str> = Vec::new();
        for i in 0..CONCEPTS.len() {
            for col in &self.columns {
                if let Mark::Annotated { note, .. } = &col.marks[i] {
                    if !notes.contains(&note.as_str()) {
                        notes.push(note);
                    }
                }
            }
        }
        notes
            .into_iter()
            .enumerate()
            .map(|(i, n)| (render::symbol(i), n))
            .collect()
    }
}
