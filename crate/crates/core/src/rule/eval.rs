use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::ast::{AggOp, Attr, BinOp, Expr, Source, UnOp};
use crate::gas::Location;
use crate::ids::EntityId;
use crate::rng::SeedStreams;
use crate::value::{StateValue, Ty, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound {0}")]
    Unbound(String),
    #[error("type mismatch: expected {expected}, found {found} ({context})")]
    TypeMismatch { expected: Ty, found: Ty, context: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite numeric result")]
    NonFinite,
    #[error("{0} is not available in this context")]
    Unavailable(String),
    #[error("choose needs at least one option")]
    EmptyChoice,
    #[error("{0}")]
    Invalid(String),
}

/// Another automaton or perceived entity, as seen from the evaluating one.
#[derive(Debug, Clone)]
pub struct Member<'a> {
    pub id: EntityId,
    pub kind: &'a str,
    pub state: &'a StateValue,
    pub location: Location,
    pub distance: f64,
}

impl Member<'_> {
    fn attr(&self, attr: &Attr) -> Result<Value, EvalError> {
        Ok(match attr {
            Attr::Id => Value::Num(self.id.0 as f64),
            Attr::Type => Value::sym(self.kind),
            Attr::X => Value::Num(self.location.x()),
            Attr::Y => Value::Num(self.location.y()),
            Attr::Dist => Value::Num(self.distance),
            Attr::Field(f) => self
                .state
                .get(f)
                .cloned()
                .ok_or_else(|| EvalError::Unbound(format!("other.{f} on {} {}", self.kind, self.id)))?,
        })
    }
}

/// Evaluation context. Each rule family (automaton rules, perception,
/// decisions, goal conditions, parameter functions) supplies its own.
pub trait Scope {
    fn tick(&self) -> u64;
    fn param(&self, name: &str) -> Option<Value>;
    fn self_attr(&self, attr: &Attr) -> Option<Value>;
    fn belief(&self, _key: &str) -> Option<Value> {
        None
    }
    fn members(&self, source: Source) -> Result<Vec<Member<'_>>, EvalError>;
    fn draw(&self, stream: &str) -> Result<f64, EvalError>;
}

/// Lazily created named random streams for one owner at one tick.
/// Successive draws on the same name advance the same stream.
#[derive(Debug)]
pub struct StreamSet {
    streams: SeedStreams,
    owner: u64,
    tick: u64,
    prefix: &'static str,
    open: RefCell<BTreeMap<String, ChaCha8Rng>>,
}

impl StreamSet {
    pub fn new(streams: SeedStreams, owner: EntityId, tick: u64, prefix: &'static str) -> Self {
        Self {
            streams,
            owner: owner.0,
            tick,
            prefix,
            open: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn draw(&self, name: &str) -> f64 {
        let mut open = self.open.borrow_mut();
        let rng = open.entry(name.to_string()).or_insert_with(|| {
            self.streams
                .stream(self.owner, self.tick, &format!("{}:{}", self.prefix, name))
        });
        rng.gen::<f64>()
    }
}

pub fn eval(expr: &Expr, scope: &dyn Scope) -> Result<Value, EvalError> {
    eval_in(expr, scope, None)
}

/// Evaluates with `other` bound to `member`, as inside an aggregate.
pub fn eval_for(expr: &Expr, scope: &dyn Scope, member: &Member<'_>) -> Result<Value, EvalError> {
    eval_in(expr, scope, Some(member))
}

pub fn eval_bool(expr: &Expr, scope: &dyn Scope) -> Result<bool, EvalError> {
    let v = eval(expr, scope)?;
    expect_bool(&v, "condition")
}

pub fn eval_num(expr: &Expr, scope: &dyn Scope) -> Result<f64, EvalError> {
    let v = eval(expr, scope)?;
    expect_num(&v, "numeric expression")
}

fn expect_num(v: &Value, context: &str) -> Result<f64, EvalError> {
    v.as_num().ok_or_else(|| EvalError::TypeMismatch {
        expected: Ty::Num,
        found: v.ty(),
        context: context.to_string(),
    })
}

fn expect_bool(v: &Value, context: &str) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| EvalError::TypeMismatch {
        expected: Ty::Bool,
        found: v.ty(),
        context: context.to_string(),
    })
}

fn finite(n: f64) -> Result<Value, EvalError> {
    if n.is_finite() {
        Ok(Value::Num(n))
    } else {
        Err(EvalError::NonFinite)
    }
}

fn eval_in(expr: &Expr, scope: &dyn Scope, other: Option<&Member<'_>>) -> Result<Value, EvalError> {
    match expr {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Tick => Ok(Value::Num(scope.tick() as f64)),
        Expr::Param(name) => scope
            .param(name)
            .ok_or_else(|| EvalError::Unbound(format!("parameter `{name}`"))),
        Expr::SelfAttr(attr) => scope
            .self_attr(attr)
            .ok_or_else(|| EvalError::Unbound(format!("self.{}", attr.name()))),
        Expr::OtherAttr(attr) => match other {
            Some(m) => m.attr(attr),
            None => Err(EvalError::Unavailable(format!("other.{}", attr.name()))),
        },
        Expr::Belief(key) => scope
            .belief(key)
            .ok_or_else(|| EvalError::Unbound(format!("belief `{key}`"))),
        Expr::Unary(op, a) => {
            let v = eval_in(a, scope, other)?;
            match op {
                UnOp::Neg => finite(-expect_num(&v, "negation")?),
                UnOp::Abs => finite(expect_num(&v, "abs")?.abs()),
                UnOp::Not => Ok(Value::Bool(!expect_bool(&v, "not")?)),
            }
        }
        Expr::Binary(op, a, b) => eval_binary(*op, a, b, scope, other),
        Expr::If(c, t, e) => {
            let cv = eval_in(c, scope, other)?;
            if expect_bool(&cv, "if condition")? {
                eval_in(t, scope, other)
            } else {
                eval_in(e, scope, other)
            }
        }
        Expr::Agg { op, source, body } => {
            let members = scope.members(*source)?;
            aggregate(*op, &members, body, scope)
        }
        Expr::Random(stream) => Ok(Value::Num(scope.draw(stream)?)),
        Expr::Choose(stream, options) => {
            if options.is_empty() {
                return Err(EvalError::EmptyChoice);
            }
            let u = scope.draw(stream)?;
            let idx = ((u * options.len() as f64) as usize).min(options.len() - 1);
            eval_in(&options[idx], scope, other)
        }
    }
}

fn eval_binary(
    op: BinOp,
    a: &Expr,
    b: &Expr,
    scope: &dyn Scope,
    other: Option<&Member<'_>>,
) -> Result<Value, EvalError> {
    match op {
        BinOp::And => {
            let l = eval_in(a, scope, other)?;
            if !expect_bool(&l, "and")? {
                return Ok(Value::Bool(false));
            }
            let r = eval_in(b, scope, other)?;
            Ok(Value::Bool(expect_bool(&r, "and")?))
        }
        BinOp::Or => {
            let l = eval_in(a, scope, other)?;
            if expect_bool(&l, "or")? {
                return Ok(Value::Bool(true));
            }
            let r = eval_in(b, scope, other)?;
            Ok(Value::Bool(expect_bool(&r, "or")?))
        }
        BinOp::Eq | BinOp::Ne => {
            let l = eval_in(a, scope, other)?;
            let r = eval_in(b, scope, other)?;
            if l.ty() != r.ty() {
                return Err(EvalError::TypeMismatch {
                    expected: l.ty(),
                    found: r.ty(),
                    context: format!("operands of {}", op.symbol()),
                });
            }
            let eq = l == r;
            Ok(Value::Bool(if op == BinOp::Eq { eq } else { !eq }))
        }
        _ => {
            let l = expect_num(&eval_in(a, scope, other)?, op.symbol())?;
            let r = expect_num(&eval_in(b, scope, other)?, op.symbol())?;
            match op {
                BinOp::Lt => Ok(Value::Bool(l < r)),
                BinOp::Le => Ok(Value::Bool(l <= r)),
                BinOp::Gt => Ok(Value::Bool(l > r)),
                BinOp::Ge => Ok(Value::Bool(l >= r)),
                BinOp::Add => finite(l + r),
                BinOp::Sub => finite(l - r),
                BinOp::Mul => finite(l * r),
                BinOp::Div | BinOp::Rem if r == 0.0 => Err(EvalError::DivisionByZero),
                BinOp::Div => finite(l / r),
                BinOp::Rem => finite(l.rem_euclid(r)),
                _ => unreachable!("logical operators handled above"),
            }
        }
    }
}

/// Aggregates over an empty collection: count, sum, min, max and fraction
/// all yield 0.
fn aggregate(op: AggOp, members: &[Member<'_>], body: &Expr, scope: &dyn Scope) -> Result<Value, EvalError> {
    if op.takes_predicate() {
        let mut hits = 0usize;
        for m in members {
            let v = eval_in(body, scope, Some(m))?;
            if expect_bool(&v, op.keyword())? {
                hits += 1;
            }
        }
        let n = hits as f64;
        return Ok(Value::Num(match op {
            AggOp::Count => n,
            _ if members.is_empty() => 0.0,
            _ => n / members.len() as f64,
        }));
    }
    let mut acc: Option<f64> = None;
    for m in members {
        let v = expect_num(&eval_in(body, scope, Some(m))?, op.keyword())?;
        acc = Some(match (op, acc) {
            (_, None) => v,
            (AggOp::Sum, Some(s)) => s + v,
            (AggOp::Min, Some(s)) => s.min(v),
            (AggOp::Max, Some(s)) => s.max(v),
            _ => unreachable!(),
        });
    }
    finite(acc.unwrap_or(0.0))
}
