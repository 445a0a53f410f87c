use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::observation::ObservationRecord;
use crate::arm::GoalId;
use crate::ids::EntityId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub tick: u64,
    pub agent: EntityId,
    pub goal: GoalId,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum MemoryRecord {
    Observation(ObservationRecord),
    Plan(PlanRecord),
}

impl MemoryRecord {
    pub fn tick(&self) -> u64 {
        match self {
            MemoryRecord::Observation(o) => o.tick,
            MemoryRecord::Plan(p) => p.tick,
        }
    }

    pub fn text(&self) -> String {
        match self {
            MemoryRecord::Observation(o) => o.text.clone(),
            MemoryRecord::Plan(p) => format!("Plan for {}: {}.", p.goal, p.steps.join(", ")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalWeights {
    pub recency: f64,
    pub keyword: f64,
    pub decay: f64,
}

impl Default for RetrievalWeights {
    fn default() -> Self {
        Self {
            recency: 1.0,
            keyword: 1.0,
            decay: 0.99,
        }
    }
}

/// Keywords to match against record text (case-insensitive, whole words).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuerySpec {
    pub keywords: Vec<String>,
}

impl QuerySpec {
    pub fn new<S: AsRef<str>>(keywords: &[S]) -> Self {
        Self {
            keywords: keywords.iter().map(|k| k.as_ref().to_lowercase()).collect(),
        }
    }

    /// Splits free text into keywords.
    pub fn from_text(text: &str) -> Self {
        Self {
            keywords: words(text).into_iter().collect(),
        }
    }
}

fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved {
    pub score: f64,
    pub seq: u64,
    pub record: MemoryRecord,
}

/// Append-only per-agent memory with optional capacity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MemoryStore {
    records: Vec<(u64, MemoryRecord)>,
    pub capacity: Option<usize>,
    pub weights: RetrievalWeights,
    next_seq: u64,
}

impl MemoryStore {
    pub fn new(capacity: Option<usize>, weights: RetrievalWeights) -> Self {
        Self {
            records: Vec::new(),
            capacity,
            weights,
            next_seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &MemoryRecord> {
        self.records.iter().map(|(_, r)| r)
    }

    fn score(&self, record: &MemoryRecord, query: &QuerySpec, now: u64) -> f64 {
        let age = now.saturating_sub(record.tick());
        let recency = self.weights.decay.powf(age as f64);
        let matched = if query.keywords.is_empty() {
            0.0
        } else {
            let have = words(&record.text());
            let hits = query.keywords.iter().filter(|k| have.contains(*k)).count();
            hits as f64 / query.keywords.len() as f64
        };
        self.weights.recency * recency + self.weights.keyword * matched
    }

    /// Appends a record; over capacity, the lowest recency-scored record
    /// (oldest insertion among equals) is evicted.
    pub fn append(&mut self, record: MemoryRecord, now: u64) -> Option<MemoryRecord> {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.records.push((seq, record));
        self.records.sort_by_key(|(s, r)| (r.tick(), *s));
        let cap = self.capacity?;
        if self.records.len() <= cap {
            return None;
        }
        let blank = QuerySpec::default();
        let (victim, _) = self
            .records
            .iter()
            .enumerate()
            .map(|(i, (s, r))| (i, (self.score(r, &blank, now), *s)))
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.1 .1.cmp(&b.1 .1)))?;
        Some(self.records.remove(victim).1)
    }

    /// Top `k` records by score; ties go to the more recent tick, then the
    /// earlier insertion.
    pub fn retrieve(&self, query: &QuerySpec, k: usize, now: u64) -> Vec<Retrieved> {
        let mut scored: Vec<Retrieved> = self
            .records
            .iter()
            .map(|(seq, r)| Retrieved {
                score: self.score(r, query, now),
                seq: *seq,
                record: r.clone(),
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(b.record.tick().cmp(&a.record.tick()))
                .then(a.seq.cmp(&b.seq))
        });
        scored.truncate(k);
        scored
    }
}
