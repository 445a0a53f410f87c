use std::fmt::Write;

use super::ast::*;
use crate::arm::GoalKind;
use crate::gas::{GeoRefConvention, NeighborhoodSpec, Rule};
use crate::magi::{EntityKind, Shape};
use crate::rule::{Assign, BinOp, Expr, MoveExpr, NeighborExpr, UnOp};
use crate::value::{Ty, Value};

const INDENT: &str = "    ";

/// Canonical text for a document. Sections come out in a fixed order (env,
/// grid, rules, types, layers, run); comments and blank-line layout are not
/// preserved.
pub fn format(doc: &ScenarioDoc) -> String {
    let mut out = String::new();
    let mut sections: Vec<String> = Vec::new();
    if !doc.env.params.is_empty() || !doc.env.functions.is_empty() {
        let mut s = String::from("env {\n");
        params_and_functions(&mut s, 1, &doc.env.params, &doc.env.functions);
        s.push_str("}\n");
        sections.push(s);
    }
    if let Some(g) = &doc.grid {
        sections.push(format!("grid {}\n", grid(g)));
    }
    for r in &doc.rules {
        sections.push(rule(r));
    }
    for t in &doc.types {
        sections.push(type_decl(t));
    }
    for l in &doc.layers {
        sections.push(layer(l));
    }
    sections.push(run(&doc.run));
    for (i, s) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(s);
    }
    out
}

fn pad(level: usize) -> String {
    INDENT.repeat(level)
}

pub fn num(n: f64) -> String {
    format!("{n}")
}

pub fn string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn value(v: &Value) -> String {
    match v {
        Value::Num(n) => num(*n),
        Value::Bool(b) => b.to_string(),
        Value::Sym(s) => string(s),
    }
}

fn grid(g: &GeoRefConvention) -> String {
    match *g {
        GeoRefConvention::Lattice {
            width,
            height,
            boundary,
        } => format!("lattice {width} {height} {}", boundary.keyword()),
        GeoRefConvention::Continuous {
            min_x,
            min_y,
            max_x,
            max_y,
            boundary,
        } => format!(
            "continuous {} {} {} {} {}",
            num(min_x),
            num(min_y),
            num(max_x),
            num(max_y),
            boundary.keyword()
        ),
    }
}

fn params_and_functions(out: &mut String, level: usize, params: &[(String, Value)], functions: &[Assign]) {
    for (name, v) in params {
        let _ = writeln!(out, "{}param {name} = {}", pad(level), value(v));
    }
    for f in functions {
        let _ = writeln!(out, "{}function {}", pad(level), assign(f));
    }
}

fn assign(a: &Assign) -> String {
    format!("{} = {}", a.target, expr(&a.value))
}

fn assigns(list: &[Assign]) -> String {
    list.iter().map(assign).collect::<Vec<_>>().join(", ")
}

fn rule(r: &RuleDecl) -> String {
    match &r.rule {
        Rule::Transition(list) => {
            if list.is_empty() {
                return format!("transition {} {{\n}}\n", r.name);
            }
            let mut s = format!("transition {} {{\n", r.name);
            for a in list {
                let _ = writeln!(s, "{INDENT}{}", assign(a));
            }
            s.push_str("}\n");
            s
        }
        Rule::Movement(m) => format!("movement {} = {}\n", r.name, move_expr(m)),
        Rule::Neighborhood(n) => format!("neighbors {} = {}\n", r.name, neighbor_expr(n)),
    }
}

pub fn move_expr(m: &MoveExpr) -> String {
    match m {
        MoveExpr::Stay => "stay".into(),
        MoveExpr::Step(a, b) => format!("step({}, {})", expr(a), expr(b)),
        MoveExpr::Goto(a, b) => format!("goto({}, {})", expr(a), expr(b)),
        MoveExpr::RandomVacant { stream, radius } => match radius {
            Some(r) => format!("random_vacant({stream}, {})", expr(r)),
            None => format!("random_vacant({stream})"),
        },
        MoveExpr::If(c, t, e) => format!("if {} then {} else {}", expr(c), move_expr(t), move_expr(e)),
    }
}

pub fn neighbor_expr(n: &NeighborExpr) -> String {
    match n {
        NeighborExpr::Static => "static".into(),
        NeighborExpr::Geometric => "geometric".into(),
        NeighborExpr::Empty => "empty".into(),
        NeighborExpr::Nearest(e) => format!("nearest({})", expr(e)),
        NeighborExpr::Filter(e) => format!("filter({})", expr(e)),
        NeighborExpr::If(c, t, e) => format!("if {} then {} else {}", expr(c), neighbor_expr(t), neighbor_expr(e)),
    }
}

fn shape(s: &Shape) -> String {
    match *s {
        Shape::Point => "point".into(),
        Shape::Disc { radius } => format!("disc {}", num(radius)),
        Shape::Box { width, height } => format!("box {} {}", num(width), num(height)),
    }
}

fn ty_keyword(t: Ty) -> &'static str {
    match t {
        Ty::Num | Ty::Any => "num",
        Ty::Bool => "bool",
        Ty::Sym => "sym",
    }
}

fn type_decl(t: &TypeDecl) -> String {
    let kw = match t.kind {
        EntityKind::Agent => "agent_type",
        EntityKind::Object => "object_type",
    };
    let p1 = pad(1);
    let p2 = pad(2);
    let mut s = format!("{kw} {} {{\n", t.name);
    if !t.fields.is_empty() {
        let _ = writeln!(s, "{p1}state {{");
        for f in &t.fields {
            let _ = writeln!(s, "{p2}{}: {} = {}", f.name, ty_keyword(f.ty), value(&f.default));
        }
        let _ = writeln!(s, "{p1}}}");
    }
    for sh in &t.shapes {
        let _ = writeln!(s, "{p1}shape {}", shape(sh));
    }
    if let Some(n) = &t.neighborhood {
        let spec = match *n {
            NeighborhoodSpec::None => "none".to_string(),
            NeighborhoodSpec::Moore(r) => format!("moore {r}"),
            NeighborhoodSpec::VonNeumann(r) => format!("von_neumann {r}"),
            NeighborhoodSpec::Radius(r) => format!("radius {}", num(r)),
        };
        let _ = writeln!(s, "{p1}neighborhood {spec}");
    }
    for (kw, v) in [
        ("transition", &t.transition),
        ("movement", &t.movement),
        ("neighbors", &t.neighbors),
    ] {
        if let Some(v) = v {
            let _ = writeln!(s, "{p1}{kw} {v}");
        }
    }
    for p in &t.perception {
        match p {
            PerceptionDecl::Entities { radius, filter: None } => {
                let _ = writeln!(s, "{p1}perception radius {}", num(*radius));
            }
            PerceptionDecl::Entities {
                radius,
                filter: Some(f),
            } => {
                let _ = writeln!(s, "{p1}perception radius {} where {}", num(*radius), expr(f));
            }
            PerceptionDecl::Param(name) => {
                let _ = writeln!(s, "{p1}perception param {name}");
            }
        }
    }
    for a in &t.actions {
        let joint = if a.joint { " joint" } else { "" };
        let _ = write!(s, "{p1}action {}{joint} when {}", a.name, expr(&a.precondition));
        if a.effects.is_empty() && a.wake.is_none() {
            s.push('\n');
            continue;
        }
        s.push_str(" {\n");
        for e in &a.effects {
            let _ = writeln!(s, "{p2}{}", assign(e));
        }
        if let Some(w) = &a.wake {
            let _ = writeln!(s, "{p2}wake {}", expr(w));
        }
        let _ = writeln!(s, "{p1}}}");
    }
    for (action, when) in &t.decisions {
        let _ = writeln!(s, "{p1}choose {action} when {}", expr(when));
    }
    for a in &t.abilities {
        let _ = writeln!(s, "{p1}ability {} when {}", a.action, expr(&a.pattern));
    }
    for a in &t.agreements {
        let _ = writeln!(
            s,
            "{p1}agreement pair {} -> {} within {}",
            a.action,
            a.goal,
            num(a.within)
        );
    }
    for g in &t.goals {
        let kind = match g.kind {
            GoalKind::Achievement => "achieve",
            GoalKind::Maintenance => "maintain",
        };
        let _ = writeln!(s, "{p1}goal {kind} {} when {}", g.id, expr(&g.condition));
    }
    for (g, u) in &t.preferences {
        let _ = writeln!(s, "{p1}preference {g} = {}", num(*u));
    }
    for p in &t.plans {
        let _ = writeln!(s, "{p1}plan {} for {}: {}", p.name, p.goal, p.steps.join(", "));
    }
    for r in &t.roles {
        let goals: Vec<&str> = r.goals.iter().map(|g| g.0.as_str()).collect();
        let _ = writeln!(s, "{p1}role {}: {}", r.name, goals.join(", "));
    }
    for u in &t.use_cases {
        let _ = writeln!(s, "{p1}use_case {}", string(u));
    }
    if let Some(a) = &t.activation {
        let _ = writeln!(s, "{p1}activation when {}", expr(a));
    }
    if let Some(n) = t.intentions {
        let _ = writeln!(s, "{p1}intentions {n}");
    }
    if let Some(b) = t.commitment_bonus {
        let _ = writeln!(s, "{p1}commitment_bonus {}", num(b));
    }
    if let Some(m) = &t.mind {
        mind(&mut s, m);
    }
    if let Some(p) = &t.possibilistic {
        possibilistic(&mut s, p);
    }
    s.push_str("}\n");
    s
}

fn mind(s: &mut String, m: &MindDecl) {
    let (p1, p2) = (pad(1), pad(2));
    let _ = writeln!(s, "{p1}mind {{");
    match &m.backend {
        Some(BackendDecl::RuleBased) => {
            let _ = writeln!(s, "{p2}backend rule_based");
        }
        Some(BackendDecl::Scripted(path)) => {
            let _ = writeln!(s, "{p2}backend scripted {}", string(path));
        }
        Some(BackendDecl::External { command, perceive }) => {
            let _ = write!(s, "{p2}backend external {}", string(command));
            if let Some(p) = perceive {
                let _ = write!(s, " perceive {}", string(p));
            }
            s.push('\n');
        }
        None => {}
    }
    for p in &m.productions {
        let _ = write!(s, "{p2}produce {}: {}", p.goal, p.steps.join(", "));
        if let Some(c) = &p.cue {
            let _ = write!(s, " cue {}", string(c));
        }
        s.push('\n');
    }
    if let Some(n) = m.memory {
        let _ = writeln!(s, "{p2}memory {n}");
    }
    if let Some(n) = m.retrieve {
        let _ = writeln!(s, "{p2}retrieve {n}");
    }
    if let Some((r, k, d)) = m.weights {
        let _ = writeln!(s, "{p2}weights {} {} {}", num(r), num(k), num(d));
    }
    for (kind, text) in &m.templates {
        let _ = writeln!(s, "{p2}template {kind} {}", string(text));
    }
    let _ = writeln!(s, "{p1}}}");
}

fn possibilistic(s: &mut String, p: &PossibilisticDecl) {
    let (p1, p2) = (pad(1), pad(2));
    let _ = writeln!(s, "{p1}possibilistic {{");
    for w in &p.worlds {
        let _ = write!(s, "{p2}world {} pi {}", w.name, num(w.pi));
        if !w.facts.is_empty() {
            let facts: Vec<String> = w.facts.iter().map(|(f, v)| format!("{f} = {}", value(v))).collect();
            let _ = write!(s, ": {}", facts.join(", "));
        }
        s.push('\n');
    }
    for (g, e) in &p.desires {
        let _ = writeln!(s, "{p2}desire {g} when {}", expr(e));
    }
    for i in &p.infos {
        let _ = writeln!(s, "{p2}info {}: {} when {}", i.name, i.worlds.join(", "), expr(&i.when));
    }
    let _ = writeln!(s, "{p1}}}");
}

fn state_suffix(state: &[Assign]) -> String {
    if state.is_empty() {
        String::new()
    } else {
        format!(" state {}", assigns(state))
    }
}

fn layer(l: &LayerDecl) -> String {
    let p1 = pad(1);
    let mut s = format!("layer {} {{\n", l.name);
    params_and_functions(&mut s, 1, &l.params, &l.functions);
    for p in &l.placements {
        match p {
            Placement::Entity {
                ty,
                x,
                y,
                shape: sh,
                state,
            } => {
                let _ = write!(s, "{p1}entity {ty} at {} {}", num(*x), num(*y));
                if let Some(sh) = sh {
                    let _ = write!(s, " shape {}", shape(sh));
                }
                let _ = writeln!(s, "{}", state_suffix(state));
            }
            Placement::Populate {
                count,
                ty,
                placing,
                state,
            } => {
                let how = match placing {
                    Placing::Vacant => "vacant",
                    Placing::Random => "random",
                };
                let _ = writeln!(s, "{p1}populate {count} {ty} {how}{}", state_suffix(state));
            }
            Placement::Fill { ty, state } => {
                let _ = writeln!(s, "{p1}fill {ty}{}", state_suffix(state));
            }
        }
    }
    s.push_str("}\n");
    s
}

fn run(r: &RunBlock) -> String {
    let p1 = pad(1);
    let mut s = String::from("run {\n");
    if let Some(n) = r.seed {
        let _ = writeln!(s, "{p1}seed {n}");
    }
    if let Some(n) = r.ticks {
        let _ = writeln!(s, "{p1}ticks {n}");
    }
    if let Some(n) = r.stride {
        let _ = writeln!(s, "{p1}stride {n}");
    }
    if !r.outputs.is_empty() {
        let _ = writeln!(s, "{p1}outputs {}", r.outputs.join(", "));
    }
    s.push_str("}\n");
    s
}

const PREC_IF: u8 = 0;
const PREC_NOT: u8 = 3;
const PREC_UNARY: u8 = 7;

/// Expression text with the fewest parentheses that parse back to the same tree.
pub fn expr(e: &Expr) -> String {
    expr_in(e, 0)
}

fn wrap(text: String, prec: u8, min: u8) -> String {
    if prec < min {
        format!("({text})")
    } else {
        text
    }
}

fn expr_in(e: &Expr, min: u8) -> String {
    match e {
        Expr::Lit(v) => value(v),
        Expr::Param(p) => p.clone(),
        Expr::Tick => "tick".into(),
        Expr::SelfAttr(a) => format!("self.{}", a.name()),
        Expr::OtherAttr(a) => format!("other.{}", a.name()),
        Expr::Belief(k) => format!("belief({})", string(k)),
        Expr::Unary(UnOp::Abs, a) => format!("abs({})", expr(a)),
        Expr::Unary(UnOp::Not, a) => wrap(format!("not {}", expr_in(a, PREC_NOT)), PREC_NOT, min),
        Expr::Unary(UnOp::Neg, a) => {
            let inner = match &**a {
                Expr::Lit(Value::Num(_)) => format!("({})", expr(a)),
                other => expr_in(other, PREC_UNARY),
            };
            wrap(format!("-{inner}"), PREC_UNARY, min)
        }
        Expr::Binary(op, a, b) => {
            let p = op.precedence();
            let cmp = matches!(
                op,
                BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
            );
            let left = expr_in(a, if cmp { p + 1 } else { p });
            let right = expr_in(b, p + 1);
            wrap(format!("{left} {} {right}", op.symbol()), p, min)
        }
        Expr::If(c, t, f) => wrap(
            format!("if {} then {} else {}", expr(c), expr(t), expr(f)),
            PREC_IF,
            min,
        ),
        Expr::Agg { op, source, body } => format!("{}({}, {})", op.keyword(), source.keyword(), expr(body)),
        Expr::Random(s) => format!("random({s})"),
        Expr::Choose(s, opts) => {
            let mut t = format!("choose({s}");
            for o in opts {
                let _ = write!(t, ", {}", expr(o));
            }
            t.push(')');
            t
        }
    }
}
