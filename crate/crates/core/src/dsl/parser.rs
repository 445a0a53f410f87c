use std::collections::BTreeSet;
use std::fmt;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use crate::arm::{GoalId, GoalKind};
use crate::gas::{Boundary, GeoRefConvention, NeighborhoodSpec, Rule};
use crate::magi::{EntityKind, Shape};
use crate::minds::Production;
use crate::rule::{AggOp, Assign, Attr, BinOp, Expr, MoveExpr, NeighborExpr, Source, UnOp};
use crate::value::{Ty, Value};

/// Words that cannot be used as names because expressions give them meaning.
pub const RESERVED: [&str; 20] = [
    "and", "or", "not", "if", "then", "else", "true", "false", "tick", "self", "other", "belief", "abs", "count",
    "fraction", "sum", "min", "max", "random", "choose",
];

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    /// Offending token text; empty at end of input.
    pub token: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if !self.token.is_empty() {
            write!(f, " (at `{}`)", self.token.escape_debug())?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = Result<T, ParseError>;

/// Parses a scenario document, reporting every syntax error found.
pub fn parse(src: &str) -> Result<ScenarioDoc, Vec<ParseError>> {
    let (tokens, lex_errors) = lex(src);
    let mut errors: Vec<ParseError> = lex_errors
        .into_iter()
        .map(|e| ParseError {
            line: e.line,
            col: e.col,
            message: e.message,
            token: e.text,
        })
        .collect();
    let (tokens, brace_errors) = balance(tokens);
    let noisy: BTreeSet<usize> = errors.iter().chain(&brace_errors).map(|e| e.line).collect();
    errors.extend(brace_errors);
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        errors: Vec::new(),
        depth: 0,
    };
    let doc = p.document();
    errors.extend(p.errors.into_iter().filter(|e| !noisy.contains(&e.line)));
    if errors.is_empty() {
        Ok(doc)
    } else {
        errors.sort_by_key(|e| (e.line, e.col));
        Err(errors)
    }
}

fn indent_of(tokens: &[Token], line: usize) -> usize {
    tokens
        .iter()
        .find(|t| t.line == line && t.tok != Tok::Newline)
        .map_or(0, |t| t.col)
}

/// Matches braces, reporting each stray `}` and each unclosed `{`, and
/// repairs the stream so the parser can continue. A `}` that starts its line
/// closes the innermost block opened at the same indentation, so an
/// unclosed inner block is blamed on its own line and is closed again at the
/// first later line indented no deeper than its opener.
fn balance(tokens: Vec<Token>) -> (Vec<Token>, Vec<ParseError>) {
    struct Open {
        token: Token,
        indent: usize,
        at: usize,
    }
    let mut out: Vec<Token> = Vec::with_capacity(tokens.len());
    let mut errors = Vec::new();
    let mut open: Vec<Open> = Vec::new();
    let mut line_start = true;
    let close = |out: &mut Vec<Token>, errors: &mut Vec<ParseError>, o: Open| {
        errors.push(err_at(&o.token, "unclosed `{`"));
        let dedent = (o.at + 1..out.len())
            .find(|&i| out[i - 1].tok == Tok::Newline && out[i].line > o.token.line && out[i].col <= o.indent);
        let i = dedent.unwrap_or(out.len());
        let at = out.get(i).unwrap_or(&o.token).clone();
        out.insert(i, synthetic(Tok::Newline, &at));
        out.insert(i + 1, synthetic(Tok::RBrace, &at));
        out.insert(i + 2, synthetic(Tok::Newline, &at));
    };
    for t in &tokens {
        match t.tok {
            Tok::LBrace => {
                open.push(Open {
                    token: t.clone(),
                    indent: indent_of(&tokens, t.line),
                    at: out.len(),
                });
                out.push(t.clone());
            }
            Tok::RBrace => {
                if open.is_empty() {
                    errors.push(err_at(t, "unexpected `}`"));
                    line_start = false;
                    continue;
                }
                if line_start && open.iter().any(|o| o.indent == t.col) {
                    while open.last().is_some_and(|o| o.indent > t.col) {
                        let o = open.pop().expect("checked");
                        close(&mut out, &mut errors, o);
                    }
                }
                open.pop();
                out.push(t.clone());
            }
            Tok::Eof => {
                while let Some(o) = open.pop() {
                    close(&mut out, &mut errors, o);
                }
                out.push(t.clone());
            }
            _ => out.push(t.clone()),
        }
        line_start = t.tok == Tok::Newline;
    }
    (out, errors)
}

fn synthetic(tok: Tok, at: &Token) -> Token {
    Token {
        tok,
        line: at.line,
        col: at.col,
        text: String::new(),
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    errors: Vec<ParseError>,
    depth: usize,
}

fn once<T>(slot: &mut Option<T>, value: T, what: &str, at: &Token) -> PResult<()> {
    if slot.is_some() {
        return Err(err_at(at, format!("duplicate `{what}`")));
    }
    *slot = Some(value);
    Ok(())
}

fn err_at(t: &Token, message: impl Into<String>) -> ParseError {
    ParseError {
        line: t.line,
        col: t.col,
        message: message.into(),
        token: t.text.clone(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn token(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        err_at(self.token(), message)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn skip_newlines(&mut self) {
        while self.eat(&Tok::Newline) {}
    }

    /// A declared name: any identifier that is not reserved.
    fn name(&mut self) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) if RESERVED.contains(&s.as_str()) => Err(self.error(format!("`{s}` is reserved"))),
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    fn names(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.name()?];
        while self.eat(&Tok::Comma) {
            out.push(self.name()?);
        }
        Ok(out)
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek() {
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("a string")),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Num(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn count(&mut self) -> PResult<u64> {
        match *self.peek() {
            Tok::Num(n) if n >= 0.0 && n.fract() == 0.0 && n <= u64::MAX as f64 => {
                self.bump();
                Ok(n as u64)
            }
            _ => Err(self.unexpected("a non-negative integer")),
        }
    }

    fn dimension(&mut self) -> PResult<u32> {
        let t = self.token().clone();
        let n = self.count()?;
        u32::try_from(n).map_err(|_| err_at(&t, "dimension too large"))
    }

    fn value(&mut self) -> PResult<Value> {
        match self.peek() {
            Tok::Str(_) => Ok(Value::Sym(self.string()?)),
            Tok::Ident(s) if s == "true" || s == "false" => {
                let b = s == "true";
                self.bump();
                Ok(Value::Bool(b))
            }
            Tok::Num(_) | Tok::Minus => Ok(Value::Num(self.number()?)),
            _ => Err(self.unexpected("a value")),
        }
    }

    fn end_stmt(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::RBrace | Tok::Eof => Ok(()),
            _ => Err(self.unexpected("end of line")),
        }
    }

    /// Skips the rest of a broken statement, including any block it opens,
    /// stopping before the `}` that closes the enclosing block.
    fn recover(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                }
                Tok::Newline if depth == 0 => {
                    self.bump();
                    return;
                }
                _ => {}
            }
            self.bump();
        }
    }

    /// `{ stmt* }`, recovering from errors statement by statement.
    fn block(&mut self, mut stmt: impl FnMut(&mut Self) -> PResult<()>) -> PResult<()> {
        self.expect(Tok::LBrace)?;
        self.skip_newlines();
        while !matches!(self.peek(), Tok::RBrace | Tok::Eof) {
            if let Err(e) = stmt(self) {
                self.errors.push(e);
                self.recover();
            }
            self.skip_newlines();
        }
        self.expect(Tok::RBrace)?;
        self.end_stmt()
    }

    fn document(&mut self) -> ScenarioDoc {
        let mut doc = ScenarioDoc::default();
        let mut env_seen = false;
        let mut run_seen = false;
        self.skip_newlines();
        while *self.peek() != Tok::Eof {
            if let Err(e) = self.item(&mut doc, &mut env_seen, &mut run_seen) {
                self.errors.push(e);
                self.recover();
                if *self.peek() == Tok::RBrace {
                    self.bump();
                }
            }
            self.skip_newlines();
        }
        if !run_seen {
            let t = self.token();
            self.errors.push(ParseError {
                line: t.line,
                col: t.col.max(1),
                message: "missing run block".into(),
                token: String::new(),
            });
        }
        doc
    }

    fn item(&mut self, doc: &mut ScenarioDoc, env_seen: &mut bool, run_seen: &mut bool) -> PResult<()> {
        let head = self.token().clone();
        let Tok::Ident(kw) = &head.tok else {
            return Err(self.unexpected("a declaration"));
        };
        match kw.as_str() {
            "env" => {
                self.bump();
                if std::mem::replace(env_seen, true) {
                    return Err(err_at(&head, "duplicate `env` block"));
                }
                let mut env = EnvBlock::default();
                self.block(|p| {
                    if p.at_kw("param") {
                        env.params.push(p.param_decl()?);
                    } else if p.at_kw("function") {
                        env.functions.push(p.function_decl()?);
                    } else {
                        return Err(p.unexpected("`param` or `function`"));
                    }
                    Ok(())
                })?;
                doc.env = env;
            }
            "grid" => {
                self.bump();
                let g = self.grid()?;
                self.end_stmt()?;
                once(&mut doc.grid, g, "grid", &head)?;
            }
            "transition" => {
                self.bump();
                let name = self.name()?;
                let mut assigns = Vec::new();
                self.block(|p| {
                    assigns.push(p.assign()?);
                    p.end_stmt()
                })?;
                doc.rules.push(RuleDecl {
                    name,
                    rule: Rule::Transition(assigns),
                });
            }
            "movement" => {
                self.bump();
                let name = self.name()?;
                self.expect(Tok::Assign)?;
                let m = self.move_expr()?;
                self.end_stmt()?;
                doc.rules.push(RuleDecl {
                    name,
                    rule: Rule::Movement(m),
                });
            }
            "neighbors" => {
                self.bump();
                let name = self.name()?;
                self.expect(Tok::Assign)?;
                let n = self.neighbor_expr()?;
                self.end_stmt()?;
                doc.rules.push(RuleDecl {
                    name,
                    rule: Rule::Neighborhood(n),
                });
            }
            "agent_type" | "object_type" => {
                let kind = if kw == "agent_type" {
                    EntityKind::Agent
                } else {
                    EntityKind::Object
                };
                self.bump();
                let name = self.name()?;
                let mut ty = TypeDecl::new(&name, kind);
                self.block(|p| p.type_stmt(&mut ty))?;
                doc.types.push(ty);
            }
            "layer" => {
                self.bump();
                let name = self.name()?;
                let mut layer = LayerDecl {
                    name,
                    params: Vec::new(),
                    functions: Vec::new(),
                    placements: Vec::new(),
                };
                self.block(|p| p.layer_stmt(&mut layer))?;
                doc.layers.push(layer);
            }
            "run" => {
                self.bump();
                if std::mem::replace(run_seen, true) {
                    return Err(err_at(&head, "duplicate `run` block"));
                }
                let mut run = RunBlock::default();
                self.block(|p| {
                    let at = p.token().clone();
                    if p.eat_kw("seed") {
                        let n = p.count()?;
                        once(&mut run.seed, n, "seed", &at)?;
                    } else if p.eat_kw("ticks") {
                        let n = p.count()?;
                        once(&mut run.ticks, n, "ticks", &at)?;
                    } else if p.eat_kw("stride") {
                        let n = p.count()?;
                        once(&mut run.stride, n, "stride", &at)?;
                    } else if p.eat_kw("outputs") {
                        run.outputs.extend(p.names()?);
                    } else {
                        return Err(p.unexpected("`seed`, `ticks`, `stride` or `outputs`"));
                    }
                    p.end_stmt()
                })?;
                doc.run = run;
            }
            _ => {
                return Err(self.error(format!("unknown declaration `{kw}`")));
            }
        }
        Ok(())
    }

    fn grid(&mut self) -> PResult<GeoRefConvention> {
        if self.eat_kw("lattice") {
            let width = self.dimension()?;
            let height = self.dimension()?;
            let boundary = self.boundary()?;
            Ok(GeoRefConvention::Lattice {
                width,
                height,
                boundary,
            })
        } else if self.eat_kw("continuous") {
            let min_x = self.number()?;
            let min_y = self.number()?;
            let max_x = self.number()?;
            let max_y = self.number()?;
            let boundary = self.boundary()?;
            Ok(GeoRefConvention::Continuous {
                min_x,
                min_y,
                max_x,
                max_y,
                boundary,
            })
        } else {
            Err(self.unexpected("`lattice` or `continuous`"))
        }
    }

    fn boundary(&mut self) -> PResult<Boundary> {
        if self.eat_kw("clamp") {
            Ok(Boundary::Clamp)
        } else if self.eat_kw("torus") {
            Ok(Boundary::Torus)
        } else {
            Err(self.unexpected("`clamp` or `torus`"))
        }
    }

    fn param_decl(&mut self) -> PResult<(String, Value)> {
        self.expect_kw("param")?;
        let name = self.name()?;
        self.expect(Tok::Assign)?;
        let v = self.value()?;
        self.end_stmt()?;
        Ok((name, v))
    }

    fn function_decl(&mut self) -> PResult<Assign> {
        self.expect_kw("function")?;
        let a = self.assign()?;
        self.end_stmt()?;
        Ok(a)
    }

    fn assign(&mut self) -> PResult<Assign> {
        let target = self.name()?;
        self.expect(Tok::Assign)?;
        let value = self.expr()?;
        Ok(Assign { target, value })
    }

    fn assigns(&mut self) -> PResult<Vec<Assign>> {
        let mut out = vec![self.assign()?];
        while self.eat(&Tok::Comma) {
            out.push(self.assign()?);
        }
        Ok(out)
    }

    fn shape(&mut self) -> PResult<Shape> {
        if self.eat_kw("point") {
            Ok(Shape::Point)
        } else if self.eat_kw("disc") {
            Ok(Shape::Disc { radius: self.number()? })
        } else if self.eat_kw("box") {
            let width = self.number()?;
            let height = self.number()?;
            Ok(Shape::Box { width, height })
        } else {
            Err(self.unexpected("`point`, `disc` or `box`"))
        }
    }

    fn goal_id(&mut self) -> PResult<GoalId> {
        Ok(GoalId(self.name()?))
    }

    fn type_stmt(&mut self, ty: &mut TypeDecl) -> PResult<()> {
        let at = self.token().clone();
        let Tok::Ident(kw) = &at.tok else {
            return Err(self.unexpected("a type statement"));
        };
        match kw.as_str() {
            "state" => {
                self.bump();
                let fields = &mut ty.fields;
                self.block(|p| {
                    let name = p.name()?;
                    p.expect(Tok::Colon)?;
                    let ty = if p.eat_kw("num") {
                        Ty::Num
                    } else if p.eat_kw("bool") {
                        Ty::Bool
                    } else if p.eat_kw("sym") {
                        Ty::Sym
                    } else {
                        return Err(p.unexpected("`num`, `bool` or `sym`"));
                    };
                    p.expect(Tok::Assign)?;
                    let default = p.value()?;
                    fields.push(FieldAst { name, ty, default });
                    p.end_stmt()
                })?;
                return Ok(());
            }
            "shape" => {
                self.bump();
                let s = self.shape()?;
                ty.shapes.push(s);
            }
            "neighborhood" => {
                self.bump();
                let spec = if self.eat_kw("moore") {
                    NeighborhoodSpec::Moore(self.dimension()?)
                } else if self.eat_kw("von_neumann") {
                    NeighborhoodSpec::VonNeumann(self.dimension()?)
                } else if self.eat_kw("radius") {
                    NeighborhoodSpec::Radius(self.number()?)
                } else if self.eat_kw("none") {
                    NeighborhoodSpec::None
                } else {
                    return Err(self.unexpected("`moore`, `von_neumann`, `radius` or `none`"));
                };
                once(&mut ty.neighborhood, spec, "neighborhood", &at)?;
            }
            "transition" | "movement" | "neighbors" => {
                let which = kw.clone();
                self.bump();
                let name = self.name()?;
                let slot = match which.as_str() {
                    "transition" => &mut ty.transition,
                    "movement" => &mut ty.movement,
                    _ => &mut ty.neighbors,
                };
                once(slot, name, &which, &at)?;
            }
            "perception" => {
                self.bump();
                if self.eat_kw("radius") {
                    let radius = self.number()?;
                    let filter = if self.eat_kw("where") { Some(self.expr()?) } else { None };
                    ty.perception.push(PerceptionDecl::Entities { radius, filter });
                } else if self.eat_kw("param") {
                    ty.perception.push(PerceptionDecl::Param(self.name()?));
                } else {
                    return Err(self.unexpected("`radius` or `param`"));
                }
            }
            "action" => {
                self.bump();
                let name = self.name()?;
                let joint = self.eat_kw("joint");
                let precondition = if self.eat_kw("when") {
                    self.expr()?
                } else {
                    Expr::boolean(true)
                };
                let mut effects = Vec::new();
                let mut wake = None;
                let has_block = *self.peek() == Tok::LBrace;
                if has_block {
                    self.block(|p| {
                        let at = p.token().clone();
                        if p.at_kw("wake") && *p.peek_at(1) != Tok::Assign {
                            p.bump();
                            let e = p.expr()?;
                            once(&mut wake, e, "wake", &at)?;
                        } else {
                            effects.push(p.assign()?);
                        }
                        p.end_stmt()
                    })?;
                }
                ty.actions.push(ActionDecl {
                    name,
                    joint,
                    precondition,
                    effects,
                    wake,
                });
                if has_block {
                    return Ok(());
                }
            }
            "choose" => {
                self.bump();
                let action = self.name()?;
                self.expect_kw("when")?;
                let when = self.expr()?;
                ty.decisions.push((action, when));
            }
            "ability" => {
                self.bump();
                let action = self.name()?;
                self.expect_kw("when")?;
                let pattern = self.expr()?;
                ty.abilities.push(AbilityDecl { action, pattern });
            }
            "agreement" => {
                self.bump();
                self.expect_kw("pair")?;
                let action = self.name()?;
                self.expect(Tok::Arrow)?;
                let goal = self.goal_id()?;
                self.expect_kw("within")?;
                let within = self.number()?;
                ty.agreements.push(AgreementDecl { action, goal, within });
            }
            "goal" => {
                self.bump();
                let kind = if self.eat_kw("achieve") {
                    GoalKind::Achievement
                } else if self.eat_kw("maintain") {
                    GoalKind::Maintenance
                } else {
                    return Err(self.unexpected("`achieve` or `maintain`"));
                };
                let id = self.goal_id()?;
                self.expect_kw("when")?;
                let condition = self.expr()?;
                ty.goals.push(GoalDecl { id, kind, condition });
            }
            "preference" => {
                self.bump();
                let goal = self.goal_id()?;
                self.expect(Tok::Assign)?;
                let u = self.number()?;
                ty.preferences.push((goal, u));
            }
            "plan" => {
                self.bump();
                let name = self.name()?;
                self.expect_kw("for")?;
                let goal = self.goal_id()?;
                self.expect(Tok::Colon)?;
                let steps = if matches!(self.peek(), Tok::Newline | Tok::RBrace | Tok::Eof) {
                    Vec::new()
                } else {
                    self.names()?
                };
                ty.plans.push(PlanDecl { name, goal, steps });
            }
            "role" => {
                self.bump();
                let name = self.name()?;
                self.expect(Tok::Colon)?;
                let goals = self.names()?.into_iter().map(GoalId).collect();
                ty.roles.push(RoleDecl { name, goals });
            }
            "use_case" => {
                self.bump();
                let s = self.string()?;
                ty.use_cases.push(s);
            }
            "activation" => {
                self.bump();
                self.expect_kw("when")?;
                let e = self.expr()?;
                once(&mut ty.activation, e, "activation", &at)?;
            }
            "intentions" => {
                self.bump();
                let n = self.count()?;
                once(&mut ty.intentions, n, "intentions", &at)?;
            }
            "commitment_bonus" => {
                self.bump();
                let n = self.number()?;
                once(&mut ty.commitment_bonus, n, "commitment_bonus", &at)?;
            }
            "mind" => {
                self.bump();
                let mut mind = MindDecl {
                    backend: None,
                    memory: None,
                    retrieve: None,
                    weights: None,
                    productions: Vec::new(),
                    templates: Vec::new(),
                };
                self.block(|p| p.mind_stmt(&mut mind))?;
                once(&mut ty.mind, mind, "mind", &at)?;
                return Ok(());
            }
            "possibilistic" => {
                self.bump();
                let mut decl = PossibilisticDecl::default();
                self.block(|p| p.possibilistic_stmt(&mut decl))?;
                once(&mut ty.possibilistic, decl, "possibilistic", &at)?;
                return Ok(());
            }
            _ => return Err(self.error(format!("unknown type statement `{kw}`"))),
        }
        self.end_stmt()
    }

    fn mind_stmt(&mut self, mind: &mut MindDecl) -> PResult<()> {
        let at = self.token().clone();
        if self.eat_kw("backend") {
            let b = if self.eat_kw("rule_based") {
                BackendDecl::RuleBased
            } else if self.eat_kw("scripted") {
                BackendDecl::Scripted(self.string()?)
            } else if self.eat_kw("external") {
                let command = self.string()?;
                let perceive = if self.eat_kw("perceive") {
                    Some(self.string()?)
                } else {
                    None
                };
                BackendDecl::External { command, perceive }
            } else {
                return Err(self.unexpected("`rule_based`, `scripted` or `external`"));
            };
            once(&mut mind.backend, b, "backend", &at)?;
        } else if self.eat_kw("produce") {
            let goal = self.goal_id()?;
            self.expect(Tok::Colon)?;
            let steps = self.names()?;
            let cue = if self.eat_kw("cue") { Some(self.string()?) } else { None };
            mind.productions.push(Production { goal, steps, cue });
        } else if self.eat_kw("memory") {
            let n = self.count()?;
            once(&mut mind.memory, n, "memory", &at)?;
        } else if self.eat_kw("retrieve") {
            let n = self.count()?;
            once(&mut mind.retrieve, n, "retrieve", &at)?;
        } else if self.eat_kw("weights") {
            let r = self.number()?;
            let m = self.number()?;
            let d = self.number()?;
            once(&mut mind.weights, (r, m, d), "weights", &at)?;
        } else if self.eat_kw("template") {
            let kind = self.name()?;
            let text = self.string()?;
            mind.templates.push((kind, text));
        } else {
            return Err(self.unexpected("a mind statement"));
        }
        self.end_stmt()
    }

    fn possibilistic_stmt(&mut self, decl: &mut PossibilisticDecl) -> PResult<()> {
        if self.eat_kw("world") {
            let name = self.name()?;
            self.expect_kw("pi")?;
            let pi = self.number()?;
            let mut facts = Vec::new();
            if self.eat(&Tok::Colon) {
                loop {
                    let f = self.name()?;
                    self.expect(Tok::Assign)?;
                    facts.push((f, self.value()?));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            decl.worlds.push(WorldDecl { name, pi, facts });
        } else if self.eat_kw("desire") {
            let goal = self.goal_id()?;
            self.expect_kw("when")?;
            let e = self.expr()?;
            decl.desires.push((goal, e));
        } else if self.eat_kw("info") {
            let name = self.name()?;
            self.expect(Tok::Colon)?;
            let worlds = self.names()?;
            self.expect_kw("when")?;
            let when = self.expr()?;
            decl.infos.push(InfoDecl { name, worlds, when });
        } else {
            return Err(self.unexpected("`world`, `desire` or `info`"));
        }
        self.end_stmt()
    }

    fn state_init(&mut self) -> PResult<Vec<Assign>> {
        if self.eat_kw("state") {
            self.assigns()
        } else {
            Ok(Vec::new())
        }
    }

    fn layer_stmt(&mut self, layer: &mut LayerDecl) -> PResult<()> {
        if self.at_kw("param") {
            layer.params.push(self.param_decl()?);
            return Ok(());
        }
        if self.at_kw("function") {
            layer.functions.push(self.function_decl()?);
            return Ok(());
        }
        if self.eat_kw("entity") {
            let ty = self.name()?;
            self.expect_kw("at")?;
            let x = self.number()?;
            let y = self.number()?;
            let shape = if self.eat_kw("shape") {
                Some(self.shape()?)
            } else {
                None
            };
            let state = self.state_init()?;
            layer.placements.push(Placement::Entity { ty, x, y, shape, state });
        } else if self.eat_kw("populate") {
            let count = self.count()?;
            let ty = self.name()?;
            let placing = if self.eat_kw("vacant") {
                Placing::Vacant
            } else if self.eat_kw("random") {
                Placing::Random
            } else {
                return Err(self.unexpected("`vacant` or `random`"));
            };
            let state = self.state_init()?;
            layer.placements.push(Placement::Populate {
                count,
                ty,
                placing,
                state,
            });
        } else if self.eat_kw("fill") {
            let ty = self.name()?;
            let state = self.state_init()?;
            layer.placements.push(Placement::Fill { ty, state });
        } else {
            return Err(self.unexpected("`param`, `function`, `entity`, `populate` or `fill`"));
        }
        self.end_stmt()
    }

    fn move_expr(&mut self) -> PResult<MoveExpr> {
        self.enter()?;
        let r = self.move_inner();
        self.depth -= 1;
        r
    }

    fn move_inner(&mut self) -> PResult<MoveExpr> {
        if self.eat_kw("stay") {
            Ok(MoveExpr::Stay)
        } else if self.at_kw("step") || self.at_kw("goto") {
            let goto = self.at_kw("goto");
            self.bump();
            self.expect(Tok::LParen)?;
            let a = self.expr()?;
            self.expect(Tok::Comma)?;
            let b = self.expr()?;
            self.expect(Tok::RParen)?;
            Ok(if goto {
                MoveExpr::Goto(a, b)
            } else {
                MoveExpr::Step(a, b)
            })
        } else if self.eat_kw("random_vacant") {
            self.expect(Tok::LParen)?;
            let stream = self.name()?;
            let radius = if self.eat(&Tok::Comma) {
                Some(self.expr()?)
            } else {
                None
            };
            self.expect(Tok::RParen)?;
            Ok(MoveExpr::RandomVacant { stream, radius })
        } else if self.eat_kw("if") {
            let c = self.expr()?;
            self.expect_kw("then")?;
            let t = self.move_expr()?;
            self.expect_kw("else")?;
            let e = self.move_expr()?;
            Ok(MoveExpr::If(c, Box::new(t), Box::new(e)))
        } else {
            Err(self.unexpected("a movement (`stay`, `step`, `goto`, `random_vacant` or `if`)"))
        }
    }

    fn neighbor_expr(&mut self) -> PResult<NeighborExpr> {
        self.enter()?;
        let r = self.neighbor_inner();
        self.depth -= 1;
        r
    }

    fn neighbor_inner(&mut self) -> PResult<NeighborExpr> {
        if self.eat_kw("static") {
            Ok(NeighborExpr::Static)
        } else if self.eat_kw("geometric") {
            Ok(NeighborExpr::Geometric)
        } else if self.eat_kw("empty") {
            Ok(NeighborExpr::Empty)
        } else if self.at_kw("nearest") || self.at_kw("filter") {
            let nearest = self.at_kw("nearest");
            self.bump();
            self.expect(Tok::LParen)?;
            let e = self.expr()?;
            self.expect(Tok::RParen)?;
            Ok(if nearest {
                NeighborExpr::Nearest(e)
            } else {
                NeighborExpr::Filter(e)
            })
        } else if self.eat_kw("if") {
            let c = self.expr()?;
            self.expect_kw("then")?;
            let t = self.neighbor_expr()?;
            self.expect_kw("else")?;
            let e = self.neighbor_expr()?;
            Ok(NeighborExpr::If(c, Box::new(t), Box::new(e)))
        } else {
            Err(self.unexpected("a neighborhood (`static`, `geometric`, `empty`, `nearest`, `filter` or `if`)"))
        }
    }

    fn enter(&mut self) -> PResult<()> {
        if self.depth >= MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        self.depth += 1;
        Ok(())
    }

    pub(super) fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.or_expr();
        self.depth -= 1;
        r
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw("or") {
            let rhs = self.and_expr()?;
            lhs = Expr::bin(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.eat_kw("and") {
            let rhs = self.not_expr()?;
            lhs = Expr::bin(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.eat_kw("not") {
            self.enter()?;
            let e = self.not_expr();
            self.depth -= 1;
            return Ok(Expr::not(e?));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        if matches!(self.peek(), Tok::EqEq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge) {
            return Err(self.error("comparisons do not chain; add parentheses"));
        }
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            if let Tok::Num(n) = *self.peek() {
                self.bump();
                return Ok(Expr::num(-n));
            }
            self.enter()?;
            let e = self.unary_expr();
            self.depth -= 1;
            return Ok(Expr::Unary(UnOp::Neg, Box::new(e?)));
        }
        self.primary()
    }

    fn call_args(&mut self) -> PResult<()> {
        self.expect(Tok::LParen)
    }

    fn attr(&mut self) -> PResult<Attr> {
        self.expect(Tok::Dot)?;
        match self.peek() {
            Tok::Ident(s) => {
                let a = Attr::from_name(s);
                self.bump();
                Ok(a)
            }
            _ => Err(self.unexpected("an attribute name")),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.token().clone();
        match &t.tok {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::num(*n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::sym(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(kw) => match kw.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::boolean(kw == "true"))
                }
                "tick" => {
                    self.bump();
                    Ok(Expr::Tick)
                }
                "self" => {
                    self.bump();
                    Ok(Expr::SelfAttr(self.attr()?))
                }
                "other" => {
                    self.bump();
                    Ok(Expr::OtherAttr(self.attr()?))
                }
                "belief" => {
                    self.bump();
                    self.call_args()?;
                    let key = self.string()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Belief(key))
                }
                "abs" => {
                    self.bump();
                    self.call_args()?;
                    let e = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Unary(UnOp::Abs, Box::new(e)))
                }
                "count" | "fraction" | "sum" | "min" | "max" => {
                    let op = match kw.as_str() {
                        "count" => AggOp::Count,
                        "fraction" => AggOp::Fraction,
                        "sum" => AggOp::Sum,
                        "min" => AggOp::Min,
                        _ => AggOp::Max,
                    };
                    self.bump();
                    self.call_args()?;
                    let source = if self.eat_kw("neighbors") {
                        Source::Neighbors
                    } else if self.eat_kw("nearby") {
                        Source::Nearby
                    } else if self.eat_kw("percepts") {
                        Source::Percepts
                    } else {
                        return Err(self.unexpected("`neighbors`, `nearby` or `percepts`"));
                    };
                    self.expect(Tok::Comma)?;
                    let body = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::agg(op, source, body))
                }
                "random" => {
                    self.bump();
                    self.call_args()?;
                    let stream = self.name()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Random(stream))
                }
                "choose" => {
                    self.bump();
                    self.call_args()?;
                    let stream = self.name()?;
                    let mut options = Vec::new();
                    while self.eat(&Tok::Comma) {
                        options.push(self.expr()?);
                    }
                    if options.is_empty() {
                        return Err(self.error("choose needs at least one option"));
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Choose(stream, options))
                }
                "if" => {
                    self.bump();
                    let c = self.expr()?;
                    self.expect_kw("then")?;
                    let a = self.expr()?;
                    self.expect_kw("else")?;
                    let b = self.expr()?;
                    Ok(Expr::ite(c, a, b))
                }
                _ => Ok(Expr::Param(self.name()?)),
            },
            _ => Err(self.unexpected("an expression")),
        }
    }
}

/// Parses a standalone expression (used by tests and tools).
pub fn parse_expr(src: &str) -> Result<Expr, Vec<ParseError>> {
    let (toks, lex_errors) = lex(src);
    if !lex_errors.is_empty() {
        return Err(lex_errors
            .into_iter()
            .map(|e| ParseError {
                line: e.line,
                col: e.col,
                message: e.message,
                token: e.text,
            })
            .collect());
    }
    let mut p = Parser {
        toks,
        pos: 0,
        errors: Vec::new(),
        depth: 0,
    };
    let e = p.expr().map_err(|e| vec![e])?;
    p.skip_newlines();
    if *p.peek() != Tok::Eof {
        return Err(vec![p.unexpected("end of input")]);
    }
    Ok(e)
}
