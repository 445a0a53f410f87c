use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::*;
use crate::gas::{referenced_types, GeoRefConvention, Location, NeighborhoodSpec, Rule};
use crate::gas::{IDENTITY_TRANSITION, STATIC_NEIGHBORHOOD, STAY_MOVEMENT};
use crate::magi::{EntityKind, Shape};
use crate::rule::{check_expr, AggOp, Attr, Expr, MoveExpr, NeighborExpr, Source, TypeEnv};
use crate::value::Ty;

/// Grid used when a document declares none.
pub const DEFAULT_GRID: GeoRefConvention = GeoRefConvention::Lattice {
    width: 1,
    height: 1,
    boundary: crate::gas::Boundary::Clamp,
};
pub const DEFAULT_TICKS: u64 = 100;
/// Output streams a run block may request.
pub const OUTPUTS: [&str; 5] = ["trajectory", "agents", "events", "summary", "transcript"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Where the problem is, e.g. "rule `judge` (type `resident`)".
    pub context: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.severity, self.context, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub entries: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.entries.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.entries.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn with(&self, severity: Severity) -> impl Iterator<Item = &Diagnostic> {
        self.entries.iter().filter(move |d| d.severity == severity)
    }

    fn push(&mut self, severity: Severity, context: impl Into<String>, message: impl Into<String>) {
        self.entries.push(Diagnostic {
            severity,
            context: context.into(),
            message: message.into(),
        });
    }

    fn error(&mut self, context: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, context, message);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.entries {
            writeln!(f, "{d}")?;
        }
        let n = |s| self.with(s).count();
        write!(
            f,
            "{} error(s), {} warning(s), {} info",
            n(Severity::Error),
            n(Severity::Warning),
            n(Severity::Info)
        )
    }
}

type Fields = BTreeMap<String, Ty>;

/// Which names and features an expression may use.
#[derive(Clone, Copy)]
struct Ctx<'a> {
    self_fields: Option<&'a Fields>,
    params: &'a Fields,
    sources: &'static [Source],
    beliefs: bool,
}

const GAS_SOURCES: &[Source] = &[Source::Neighbors, Source::Nearby];
const AGENT_SOURCES: &[Source] = &[Source::Neighbors, Source::Nearby, Source::Percepts];
const ALL_SOURCES: &[Source] = AGENT_SOURCES;

struct Checker<'a> {
    doc: &'a ScenarioDoc,
    report: ValidationReport,
    others: Fields,
    params: Fields,
    global_params: Fields,
    grid: GeoRefConvention,
}

fn field_map(t: &TypeDecl) -> Fields {
    t.fields.iter().map(|f| (f.name.clone(), f.ty)).collect()
}

fn merge(into: &mut Fields, name: &str, ty: Ty) {
    into.entry(name.to_string())
        .and_modify(|t| {
            if *t != ty {
                *t = Ty::Any;
            }
        })
        .or_insert(ty);
}

fn duplicates<'n>(names: impl IntoIterator<Item = &'n str>) -> Vec<&'n str> {
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            dup.insert(n);
        }
    }
    dup.into_iter().collect()
}

/// Checks names, types and structural requirements of a parsed document.
pub fn validate(doc: &ScenarioDoc) -> ValidationReport {
    let mut others = Fields::new();
    for t in &doc.types {
        for f in &t.fields {
            merge(&mut others, &f.name, f.ty);
        }
    }
    let global_params: Fields = doc.env.params.iter().map(|(n, v)| (n.clone(), v.ty())).collect();
    let mut params = global_params.clone();
    for l in &doc.layers {
        for (n, v) in &l.params {
            merge(&mut params, n, v.ty());
        }
    }
    let mut c = Checker {
        doc,
        report: ValidationReport::default(),
        others,
        params,
        global_params,
        grid: doc.grid.unwrap_or(DEFAULT_GRID),
    };
    c.document();
    c.report
}

impl<'a> Checker<'a> {
    fn check(&mut self, context: &str, expr: &Expr, ctx: Ctx<'_>, want: Option<Ty>, what: &str) {
        let env = TypeEnv {
            self_fields: ctx.self_fields,
            other_fields: &self.others,
            params: ctx.params,
            sources: ctx.sources,
            beliefs: ctx.beliefs,
            random: true,
        };
        match check_expr(expr, &env) {
            Ok(ty) => {
                if let Some(w) = want {
                    if !w.accepts(ty) {
                        self.report
                            .error(context, format!("type error: {what} must be {w}, found {ty}"));
                    }
                }
            }
            Err(errs) => {
                for e in errs {
                    self.report.error(context, e);
                }
            }
        }
        for ty in referenced_types(expr) {
            if self.doc.type_decl(&ty).is_none() {
                self.report
                    .error(context, format!("compares against undeclared type `{ty}`"));
            }
        }
    }

    /// Checks a predicate in which `other` is a candidate entity.
    fn check_member_predicate(&mut self, context: &str, expr: &Expr, ctx: Ctx<'_>, what: &str) {
        let wrapped = Expr::agg(AggOp::Count, Source::Neighbors, expr.clone());
        let before = self.report.entries.len();
        self.check(
            context,
            &wrapped,
            Ctx {
                sources: ALL_SOURCES,
                ..ctx
            },
            None,
            what,
        );
        for d in &mut self.report.entries[before..] {
            d.message = d.message.replace("count expects", &format!("{what} expects"));
        }
    }

    fn document(&mut self) {
        let doc = self.doc;
        if doc.grid.is_none() {
            self.report.push(
                Severity::Info,
                "grid",
                "no grid declared; defaulted to lattice 1 1 clamp",
            );
        }
        if let Err(e) = self.grid.validate() {
            self.report.error("grid", e.to_string());
        }
        for d in duplicates(doc.rules.iter().map(|r| r.name.as_str())) {
            self.report.error(format!("rule `{d}`"), "declared more than once");
        }
        for d in duplicates(doc.types.iter().map(|t| t.name.as_str())) {
            self.report.error(format!("type `{d}`"), "declared more than once");
        }
        for d in duplicates(doc.layers.iter().map(|l| l.name.as_str())) {
            self.report.error(format!("layer `{d}`"), "declared more than once");
        }
        for d in duplicates(doc.env.params.iter().map(|p| p.0.as_str())) {
            self.report
                .error(format!("env parameter `{d}`"), "declared more than once");
        }
        if doc.layers.is_empty() {
            self.report.push(
                Severity::Warning,
                "document",
                "no layers declared; the run has no entities",
            );
        }
        let globals = self.global_params.clone();
        for f in &doc.env.functions {
            let context = format!("env function `{}`", f.target);
            self.param_function(&context, f, &globals);
        }
        self.rules();
        for t in &doc.types {
            self.type_decl(t);
        }
        self.layers();
        self.run();
    }

    fn param_function(&mut self, context: &str, f: &crate::rule::Assign, params: &Fields) {
        let ctx = Ctx {
            self_fields: None,
            params,
            sources: &[],
            beliefs: false,
        };
        match params.get(&f.target) {
            None => self
                .report
                .error(context, format!("assigns undeclared parameter `{}`", f.target)),
            Some(ty) => self.check(context, &f.value, ctx, Some(*ty), "the new value"),
        }
    }

    fn users(&self, rule: &str) -> Vec<&'a TypeDecl> {
        let doc = self.doc;
        doc.types
            .iter()
            .filter(|t| {
                [&t.transition, &t.movement, &t.neighbors]
                    .iter()
                    .any(|r| r.as_deref() == Some(rule))
            })
            .collect()
    }

    fn rules(&mut self) {
        let doc = self.doc;
        let params = self.params.clone();
        for r in &doc.rules {
            let users = self.users(&r.name);
            if users.is_empty() {
                self.report.push(
                    Severity::Warning,
                    format!("rule `{}`", r.name),
                    "never used by any type",
                );
                continue;
            }
            for t in users {
                let fields = field_map(t);
                let context = format!("rule `{}` (type `{}`)", r.name, t.name);
                let ctx = Ctx {
                    self_fields: Some(&fields),
                    params: &params,
                    sources: GAS_SOURCES,
                    beliefs: false,
                };
                match &r.rule {
                    Rule::Transition(assigns) => {
                        for d in duplicates(assigns.iter().map(|a| a.target.as_str())) {
                            self.report.error(&context, format!("assigns `{d}` more than once"));
                        }
                        for a in assigns {
                            match fields.get(&a.target) {
                                None => self
                                    .report
                                    .error(&context, format!("assigns undeclared field `{}`", a.target)),
                                Some(ty) => {
                                    let what = format!("the value of `{}`", a.target);
                                    self.check(&context, &a.value, ctx, Some(*ty), &what)
                                }
                            }
                        }
                    }
                    Rule::Movement(m) => self.movement(&context, m, ctx),
                    Rule::Neighborhood(n) => self.neighborhood(&context, n, ctx),
                }
            }
        }
    }

    fn movement(&mut self, context: &str, m: &MoveExpr, ctx: Ctx<'_>) {
        match m {
            MoveExpr::Stay => {}
            MoveExpr::Step(a, b) | MoveExpr::Goto(a, b) => {
                self.check(context, a, ctx, Some(Ty::Num), "a coordinate");
                self.check(context, b, ctx, Some(Ty::Num), "a coordinate");
            }
            MoveExpr::RandomVacant { radius, .. } => {
                if !self.grid.is_lattice() {
                    self.report.error(context, "random_vacant needs a lattice grid");
                }
                if let Some(r) = radius {
                    self.check(context, r, ctx, Some(Ty::Num), "the search radius");
                }
            }
            MoveExpr::If(c, t, e) => {
                self.check(context, c, ctx, Some(Ty::Bool), "a condition");
                self.movement(context, t, ctx);
                self.movement(context, e, ctx);
            }
        }
    }

    fn neighborhood(&mut self, context: &str, n: &NeighborExpr, ctx: Ctx<'_>) {
        match n {
            NeighborExpr::Static | NeighborExpr::Geometric | NeighborExpr::Empty => {}
            NeighborExpr::Nearest(k) => self.check(context, k, ctx, Some(Ty::Num), "the neighbor count"),
            NeighborExpr::Filter(p) => self.check_member_predicate(context, p, ctx, "filter"),
            NeighborExpr::If(c, t, e) => {
                self.check(context, c, ctx, Some(Ty::Bool), "a condition");
                self.neighborhood(context, t, ctx);
                self.neighborhood(context, e, ctx);
            }
        }
    }

    fn rule_ref(&mut self, t: &TypeDecl, kind: &'static str, name: Option<&String>, builtin: &str) {
        let context = format!("type `{}`", t.name);
        let Some(name) = name else {
            if kind == "transition" {
                self.report.error(
                    context,
                    "no transition rule; declare one (use `transition identity` for none)",
                );
            } else {
                self.report.push(
                    Severity::Info,
                    context,
                    format!("{kind} rule defaulted to identity (`{builtin}`)"),
                );
            }
            return;
        };
        let found = self.doc.rule(name).map(|r| r.rule.kind());
        match found {
            Some(k) if k == kind => {}
            Some(k) => self
                .report
                .error(context, format!("uses `{name}` as a {kind} rule but it is a {k} rule")),
            None if name == builtin => {}
            None => self.report.error(context, format!("unknown {kind} rule `{name}`")),
        }
    }

    fn type_decl(&mut self, t: &'a TypeDecl) {
        let context = format!("type `{}`", t.name);
        let fields = field_map(t);
        for d in duplicates(t.fields.iter().map(|f| f.name.as_str())) {
            self.report
                .error(&context, format!("field `{d}` declared more than once"));
        }
        for f in &t.fields {
            if Attr::RESERVED.contains(&f.name.as_str()) {
                self.report.error(
                    &context,
                    format!("field name `{}` is reserved for a built-in attribute", f.name),
                );
            }
            if f.default.ty() != f.ty {
                self.report.error(
                    &context,
                    format!("field `{}` is {} but its default is {}", f.name, f.ty, f.default.ty()),
                );
            }
        }
        for s in &t.shapes {
            let ok = match *s {
                Shape::Point => true,
                Shape::Disc { radius } => radius > 0.0,
                Shape::Box { width, height } => width > 0.0 && height > 0.0,
            };
            if !ok {
                self.report
                    .error(&context, format!("shape `{s}` needs positive dimensions"));
            }
        }
        match t.neighborhood {
            None => self
                .report
                .push(Severity::Info, &context, "neighborhood defaulted to `none`"),
            Some(NeighborhoodSpec::Radius(r)) if r.is_nan() || r <= 0.0 => {
                self.report.error(&context, "neighborhood radius must be positive")
            }
            _ => {}
        }
        self.rule_ref(t, "transition", t.transition.as_ref(), IDENTITY_TRANSITION);
        self.rule_ref(t, "movement", t.movement.as_ref(), STAY_MOVEMENT);
        self.rule_ref(t, "neighborhood", t.neighbors.as_ref(), STATIC_NEIGHBORHOOD);
        if t.kind == EntityKind::Object {
            self.object_restrictions(t);
            return;
        }
        let params = self.params.clone();
        let ctx = Ctx {
            self_fields: Some(&fields),
            params: &params,
            sources: AGENT_SOURCES,
            beliefs: true,
        };
        self.agent_functions(t, ctx);
        self.arm_blocks(t, ctx);
    }

    fn object_restrictions(&mut self, t: &TypeDecl) {
        let agent_only = [
            ("perception", !t.perception.is_empty()),
            ("action", !t.actions.is_empty()),
            ("choose", !t.decisions.is_empty()),
            ("ability", !t.abilities.is_empty()),
            ("agreement", !t.agreements.is_empty()),
            ("goal", !t.goals.is_empty()),
            ("preference", !t.preferences.is_empty()),
            ("plan", !t.plans.is_empty()),
            ("role", !t.roles.is_empty()),
            ("use_case", !t.use_cases.is_empty()),
            ("activation", t.activation.is_some()),
            ("intentions", t.intentions.is_some()),
            ("commitment_bonus", t.commitment_bonus.is_some()),
            ("mind", t.mind.is_some()),
            ("possibilistic", t.possibilistic.is_some()),
        ];
        for (what, present) in agent_only {
            if present {
                self.report.error(
                    format!("type `{}`", t.name),
                    format!("`{what}` is only allowed in agent types"),
                );
            }
        }
    }

    fn agent_functions(&mut self, t: &TypeDecl, ctx: Ctx<'_>) {
        let context = format!("type `{}`", t.name);
        let fields = ctx.self_fields.expect("agent context has self");
        for p in &t.perception {
            match p {
                PerceptionDecl::Entities { radius, filter } => {
                    if radius.is_nan() || *radius < 0.0 {
                        self.report.error(&context, "perception radius must be non-negative");
                    }
                    if let Some(f) = filter {
                        self.check_member_predicate(
                            &format!("perception filter (type `{}`)", t.name),
                            f,
                            ctx,
                            "filter",
                        );
                    }
                }
                PerceptionDecl::Param(name) => {
                    if !self.params.contains_key(name) {
                        self.report
                            .error(&context, format!("perceives undeclared parameter `{name}`"));
                    }
                }
            }
        }
        for d in duplicates(t.actions.iter().map(|a| a.name.as_str())) {
            self.report
                .error(&context, format!("action `{d}` declared more than once"));
        }
        for a in &t.actions {
            let actx = format!("action `{}` (type `{}`)", a.name, t.name);
            self.check(&actx, &a.precondition, ctx, Some(Ty::Bool), "the precondition");
            for e in &a.effects {
                match fields.get(&e.target) {
                    None => self
                        .report
                        .error(&actx, format!("assigns undeclared field `{}`", e.target)),
                    Some(ty) => {
                        let what = format!("the value of `{}`", e.target);
                        self.check(&actx, &e.value, ctx, Some(*ty), &what);
                    }
                }
            }
            if let Some(w) = &a.wake {
                self.check(&actx, w, ctx, Some(Ty::Num), "the wake delay");
            }
            if a.joint && !t.agreements.iter().any(|g| g.action == a.name) {
                self.report.push(
                    Severity::Warning,
                    &actx,
                    "joint action has no agreement and never takes effect",
                );
            }
        }
        for (action, when) in &t.decisions {
            let dctx = format!("choose `{action}` (type `{}`)", t.name);
            if t.action(action).is_none() {
                self.report.error(&dctx, format!("unknown action `{action}`"));
            }
            self.check(&dctx, when, ctx, Some(Ty::Bool), "the decision condition");
        }
        for a in &t.abilities {
            let actx = format!("ability `{}` (type `{}`)", a.action, t.name);
            if t.action(&a.action).is_none() {
                self.report.error(
                    &actx,
                    "has no matching capability (abilities must be a subset of capabilities)",
                );
            }
            self.check(&actx, &a.pattern, ctx, Some(Ty::Bool), "the ability pattern");
        }
        for g in &t.agreements {
            let gctx = format!("agreement `{}` (type `{}`)", g.action, t.name);
            match t.action(&g.action) {
                None => self.report.error(&gctx, format!("unknown action `{}`", g.action)),
                Some(a) if !a.joint => self.report.error(&gctx, "action is not declared `joint`"),
                _ => {}
            }
            if t.goal(&g.goal).is_none() {
                self.report.error(&gctx, format!("unknown goal `{}`", g.goal));
            }
            if g.within.is_nan() || g.within < 0.0 {
                self.report.error(&gctx, "distance must be non-negative");
            }
        }
        if let Some(a) = &t.activation {
            self.check(&context, a, ctx, Some(Ty::Bool), "the activation trigger");
        }
    }

    fn plan_steps(&mut self, context: &str, t: &TypeDecl, steps: &[String]) {
        for s in steps {
            if t.action(s).is_none() {
                self.report
                    .error(context, format!("step `{s}` is not a capability of the type"));
            }
        }
    }

    fn arm_blocks(&mut self, t: &TypeDecl, ctx: Ctx<'_>) {
        let context = format!("type `{}`", t.name);
        for d in duplicates(t.goals.iter().map(|g| g.id.0.as_str())) {
            self.report
                .error(&context, format!("goal `{d}` declared more than once"));
        }
        for g in &t.goals {
            let gctx = format!("goal `{}` (type `{}`)", g.id, t.name);
            self.check(&gctx, &g.condition, ctx, Some(Ty::Bool), "the goal condition");
        }
        for d in duplicates(t.preferences.iter().map(|p| p.0 .0.as_str())) {
            self.report
                .error(&context, format!("preference for `{d}` declared more than once"));
        }
        for (g, u) in &t.preferences {
            if t.goal(g).is_none() {
                self.report
                    .error(&context, format!("preference for unknown goal `{g}`"));
            }
            if !u.is_finite() {
                self.report
                    .error(&context, format!("preference for `{g}` is not finite"));
            }
        }
        for d in duplicates(t.plans.iter().map(|p| p.name.as_str())) {
            self.report
                .error(&context, format!("plan `{d}` declared more than once"));
        }
        for d in duplicates(t.plans.iter().map(|p| p.goal.0.as_str())) {
            self.report
                .error(&context, format!("goal `{d}` has more than one library plan"));
        }
        for p in &t.plans {
            let pctx = format!("plan `{}` (type `{}`)", p.name, t.name);
            if t.goal(&p.goal).is_none() {
                self.report.error(&pctx, format!("unknown goal `{}`", p.goal));
            }
            self.plan_steps(&pctx, t, &p.steps);
        }
        for r in &t.roles {
            for g in &r.goals {
                if t.goal(g).is_none() {
                    self.report.error(
                        format!("role `{}` (type `{}`)", r.name, t.name),
                        format!("unknown goal `{g}`"),
                    );
                }
            }
        }
        if t.intentions == Some(0) {
            self.report.error(&context, "intentions must be at least 1");
        }
        if let Some(b) = t.commitment_bonus {
            if !(b.is_finite() && b >= 0.0) {
                self.report
                    .error(&context, "commitment_bonus must be a non-negative number");
            }
        }
        if let Some(m) = &t.mind {
            self.mind(t, m);
        }
        if let Some(p) = &t.possibilistic {
            self.possibilistic(t, p, ctx);
        }
    }

    fn mind(&mut self, t: &TypeDecl, m: &MindDecl) {
        let context = format!("mind (type `{}`)", t.name);
        match &m.backend {
            None => self.report.error(&context, "no backend declared"),
            Some(BackendDecl::RuleBased) => {
                if m.productions.is_empty() {
                    self.report.push(
                        Severity::Warning,
                        &context,
                        "rule_based backend without productions never plans",
                    );
                }
            }
            Some(_) => {
                if !m.productions.is_empty() {
                    self.report.push(
                        Severity::Warning,
                        &context,
                        "productions are only used by the rule_based backend",
                    );
                }
            }
        }
        for p in &m.productions {
            if t.goal(&p.goal).is_none() {
                self.report
                    .error(&context, format!("production for unknown goal `{}`", p.goal));
            }
            self.plan_steps(&context, t, &p.steps);
        }
        if m.memory == Some(0) {
            self.report.error(&context, "memory capacity must be at least 1");
        }
        if let Some((r, k, d)) = m.weights {
            if !(r.is_finite() && k.is_finite() && d > 0.0 && d <= 1.0) {
                self.report.error(
                    &context,
                    "weights need finite recency and keyword weights and a decay in (0, 1]",
                );
            }
        }
        for (kind, _) in &m.templates {
            let known = kind == crate::minds::ENTITY_TEMPLATE
                || kind == crate::minds::PARAM_TEMPLATE
                || self.doc.type_decl(kind).is_some();
            if !known {
                self.report.push(
                    Severity::Warning,
                    &context,
                    format!("template for unknown kind `{kind}`"),
                );
            }
        }
        if !t.plans.is_empty() {
            self.report.push(
                Severity::Warning,
                format!("type `{}`", t.name),
                "plan library is ignored because the type plans through its mind",
            );
        }
    }

    fn possibilistic(&mut self, t: &TypeDecl, p: &PossibilisticDecl, ctx: Ctx<'_>) {
        let context = format!("possibilistic (type `{}`)", t.name);
        if p.worlds.is_empty() {
            self.report.error(&context, "no worlds declared");
        }
        for d in duplicates(p.worlds.iter().map(|w| w.name.as_str())) {
            self.report
                .error(&context, format!("world `{d}` declared more than once"));
        }
        for w in &p.worlds {
            if !(0.0..=1.0).contains(&w.pi) {
                self.report.error(
                    &context,
                    format!("world `{}` has possibility {} outside [0, 1]", w.name, w.pi),
                );
            }
        }
        let max = p.worlds.iter().map(|w| w.pi).fold(0.0, f64::max);
        if !p.worlds.is_empty() && (max - 1.0).abs() > crate::arm::NORMALIZATION_EPS {
            self.report.error(
                &context,
                format!("distribution is not normalized (max possibility {max})"),
            );
        }
        for (g, guard) in &p.desires {
            if t.goal(g).is_none() {
                self.report.error(&context, format!("desire for unknown goal `{g}`"));
            }
            self.check(&context, guard, ctx, Some(Ty::Bool), "the desire guard");
        }
        for i in &p.infos {
            for w in &i.worlds {
                if !p.worlds.iter().any(|x| &x.name == w) {
                    self.report
                        .error(&context, format!("info `{}` names unknown world `{w}`", i.name));
                }
            }
            self.check(&context, &i.when, ctx, Some(Ty::Bool), "the info condition");
        }
    }

    fn layers(&mut self) {
        let doc = self.doc;
        let cells = match self.grid {
            GeoRefConvention::Lattice { width, height, .. } => Some(u64::from(width) * u64::from(height)),
            GeoRefConvention::Continuous { .. } => None,
        };
        let mut occupied: BTreeSet<(i64, i64)> = BTreeSet::new();
        let mut populated = 0u64;
        for l in &doc.layers {
            let lctx = format!("layer `{}`", l.name);
            for d in duplicates(l.params.iter().map(|p| p.0.as_str())) {
                self.report
                    .error(&lctx, format!("parameter `{d}` declared more than once"));
            }
            let mut visible = self.global_params.clone();
            for (n, v) in &l.params {
                visible.insert(n.clone(), v.ty());
            }
            let own: Fields = l.params.iter().map(|(n, v)| (n.clone(), v.ty())).collect();
            for f in &l.functions {
                let context = format!("function `{}` (layer `{}`)", f.target, l.name);
                if !own.contains_key(&f.target) {
                    self.report
                        .error(&context, format!("assigns undeclared layer parameter `{}`", f.target));
                    continue;
                }
                self.param_function(&context, f, &visible);
            }
            for (i, p) in l.placements.iter().enumerate() {
                let pctx = format!("placement {} (layer `{}`)", i + 1, l.name);
                let Some(t) = doc.type_decl(p.type_name()) else {
                    self.report.error(&pctx, format!("unknown type `{}`", p.type_name()));
                    continue;
                };
                let fields = field_map(t);
                let ctx = Ctx {
                    self_fields: Some(&fields),
                    params: &visible,
                    sources: &[],
                    beliefs: false,
                };
                for d in duplicates(p.state().iter().map(|a| a.target.as_str())) {
                    self.report.error(&pctx, format!("sets `{d}` more than once"));
                }
                for a in p.state() {
                    match fields.get(&a.target) {
                        None => self
                            .report
                            .error(&pctx, format!("sets undeclared field `{}`", a.target)),
                        Some(ty) => {
                            let what = format!("the value of `{}`", a.target);
                            self.check(&pctx, &a.value, ctx, Some(*ty), &what);
                        }
                    }
                }
                let admissible = |s: &Shape| {
                    if t.shapes.is_empty() {
                        *s == Shape::Point
                    } else {
                        t.shapes.contains(s)
                    }
                };
                match p {
                    Placement::Entity { x, y, shape, .. } => {
                        if let Some(s) = shape {
                            if !admissible(s) {
                                self.report
                                    .error(&pctx, format!("shape `{s}` is not admissible for type `{}`", t.name));
                            }
                        }
                        match self.location(*x, *y) {
                            Ok(loc) => {
                                if let Location::Cell(cx, cy) = loc {
                                    occupied.insert((cx, cy));
                                }
                            }
                            Err(m) => self.report.error(&pctx, m),
                        }
                    }
                    Placement::Populate { count, placing, .. } => match (placing, cells) {
                        (Placing::Vacant, None) => self.report.error(&pctx, "vacant placement needs a lattice grid"),
                        (Placing::Vacant, Some(n)) => {
                            let free = n.saturating_sub(occupied.len() as u64 + populated);
                            if *count > free {
                                self.report.error(
                                    &pctx,
                                    format!("asks for {count} vacant cells but at most {free} remain"),
                                );
                            }
                            populated += count;
                        }
                        (Placing::Random, _) => {}
                    },
                    Placement::Fill { .. } => match cells {
                        None => self.report.error(&pctx, "fill needs a lattice grid"),
                        Some(n) => populated = n,
                    },
                }
            }
        }
    }

    fn location(&self, x: f64, y: f64) -> Result<Location, String> {
        let loc = if self.grid.is_lattice() {
            if x.fract() != 0.0 || y.fract() != 0.0 {
                return Err(format!("lattice position ({x}, {y}) is not a cell"));
            }
            Location::Cell(x as i64, y as i64)
        } else {
            Location::Point(x, y)
        };
        self.grid.check(&loc).map_err(|e| e.to_string())?;
        Ok(loc)
    }

    fn run(&mut self) {
        let r = &self.doc.run;
        if r.seed.is_none() {
            self.report.push(Severity::Info, "run", "seed defaulted to 0");
        }
        match r.ticks {
            None => self
                .report
                .push(Severity::Info, "run", format!("ticks defaulted to {DEFAULT_TICKS}")),
            Some(0) => self.report.error("run", "ticks must be positive"),
            _ => {}
        }
        if r.stride == Some(0) {
            self.report.error("run", "stride must be at least 1");
        }
        for o in &r.outputs {
            if !OUTPUTS.contains(&o.as_str()) {
                self.report.error(
                    "run",
                    format!("unknown output `{o}` (expected one of {})", OUTPUTS.join(", ")),
                );
            }
        }
        for d in duplicates(r.outputs.iter().map(String::as_str)) {
            self.report.error("run", format!("output `{d}` listed more than once"));
        }
    }
}
