use std::fmt;

use log::warn;

use super::memory::Retrieved;
use super::transport::{Exchange, MindRequest, Mode, Transcript, Transport};
use super::MindError;
use crate::arm::{validate_steps, Goal, GoalId, PlanningError, SkillSet};
use crate::ids::EntityId;

/// A rule-based production: plan `steps` for `goal`, optionally only when
/// some retrieved memory mentions `cue`.
#[derive(Debug, Clone, PartialEq)]
pub struct Production {
    pub goal: GoalId,
    pub steps: Vec<String>,
    pub cue: Option<String>,
}

pub struct ExternalBackend {
    pub plan: Box<dyn Transport>,
    /// A separate channel for perception; without one, observations keep their template text.
    pub perceive: Option<Box<dyn Transport>>,
    pub log: Vec<Exchange>,
}

impl fmt::Debug for ExternalBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalBackend")
            .field("perceive", &self.perceive.is_some())
            .field("log", &self.log.len())
            .finish()
    }
}

impl ExternalBackend {
    pub fn new(plan: Box<dyn Transport>, perceive: Option<Box<dyn Transport>>) -> Self {
        Self {
            plan,
            perceive,
            log: Vec::new(),
        }
    }

    fn call(&mut self, agent: EntityId, tick: u64, mode: Mode, prompt: String) -> Result<String, MindError> {
        let transport = match mode {
            Mode::Plan => &mut self.plan,
            Mode::Perceive => self.perceive.as_mut().expect("caller checked"),
        };
        let request = MindRequest {
            agent,
            tick,
            mode,
            prompt,
        };
        let text = transport.exchange(&request)?;
        self.log.push(Exchange {
            agent,
            tick,
            mode,
            prompt: request.prompt,
            text: text.clone(),
        });
        Ok(text)
    }
}

#[derive(Debug)]
pub enum MindBackend {
    RuleBased(Vec<Production>),
    Scripted(Transcript),
    External(ExternalBackend),
}

impl MindBackend {
    pub fn kind(&self) -> &'static str {
        match self {
            MindBackend::RuleBased(_) => "rule_based",
            MindBackend::Scripted(_) => "scripted",
            MindBackend::External(_) => "external",
        }
    }

    /// Recorded exchanges, for external backends.
    pub fn exchanges(&self) -> &[Exchange] {
        match self {
            MindBackend::External(e) => &e.log,
            _ => &[],
        }
    }

    /// Rewrites an observation's text; backends without a perception channel return it unchanged.
    pub fn perceive(&mut self, agent: EntityId, tick: u64, text: &str) -> Result<String, MindError> {
        match self {
            MindBackend::RuleBased(_) => Ok(text.to_string()),
            MindBackend::Scripted(t) => Ok(t.take(agent, tick, Mode::Perceive).unwrap_or_else(|| text.to_string())),
            MindBackend::External(e) if e.perceive.is_some() => e.call(agent, tick, Mode::Perceive, text.to_string()),
            MindBackend::External(_) => Ok(text.to_string()),
        }
    }

    /// Steps for `goal`, validated against `skills`; `None` when the backend has no plan.
    pub fn plan(
        &mut self,
        agent: EntityId,
        tick: u64,
        goal: &Goal,
        memories: &[Retrieved],
        skills: &SkillSet,
    ) -> Result<Option<Vec<String>>, MindError> {
        let steps = match self {
            MindBackend::RuleBased(rules) => {
                let texts: Vec<String> = memories.iter().map(|m| m.record.text().to_lowercase()).collect();
                let fires = |p: &&Production| {
                    p.goal == goal.id
                        && p.cue
                            .as_ref()
                            .is_none_or(|c| texts.iter().any(|t| t.contains(&c.to_lowercase())))
                };
                match rules.iter().find(fires) {
                    Some(p) => p.steps.clone(),
                    None => return Ok(None),
                }
            }
            MindBackend::Scripted(t) => match t.take(agent, tick, Mode::Plan) {
                Some(text) => parse_plan_text(&text)?,
                None => return Ok(None),
            },
            MindBackend::External(e) => {
                let prompt = plan_prompt(agent, tick, goal, memories, skills);
                let text = e.call(agent, tick, Mode::Plan, prompt)?;
                parse_plan_text(&text).inspect_err(|err| warn!("agent {agent} tick {tick}: {err}"))?
            }
        };
        validate_steps(&steps, skills)?;
        Ok(Some(steps))
    }
}

pub fn plan_prompt(agent: EntityId, tick: u64, goal: &Goal, memories: &[Retrieved], skills: &SkillSet) -> String {
    let mut prompt = format!(
        "You are agent {agent} at tick {tick}. Your goal is to {} {}.\nAvailable actions: {}.\n",
        goal.kind.keyword(),
        goal.id,
        skills.capabilities.keys().cloned().collect::<Vec<_>>().join(", ")
    );
    if !memories.is_empty() {
        prompt.push_str("Relevant memories:\n");
        for m in memories {
            prompt.push_str(&format!("- [tick {}] {}\n", m.record.tick(), m.record.text()));
        }
    }
    prompt.push_str("Reply with a plan: one action name per line.");
    prompt
}

fn strip_marker(line: &str) -> &str {
    if let Some(rest) = line.strip_prefix("- ").or_else(|| line.strip_prefix("* ")) {
        return rest.trim();
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim();
        }
    }
    line
}

/// One action per line; list markers (`- `, `* `, `1.`, `1)`) are stripped.
pub fn parse_plan_text(text: &str) -> Result<Vec<String>, PlanningError> {
    let mut steps = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let step = strip_marker(line);
        let ident = step.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && step.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !ident {
            return Err(PlanningError::Unparseable(format!("`{line}` is not an action name")));
        }
        steps.push(step.to_string());
    }
    if steps.is_empty() {
        return Err(PlanningError::Unparseable("empty plan".into()));
    }
    Ok(steps)
}
