use serde::{Deserialize, Serialize};

use crate::value::Value;

/// Collections an aggregate can range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// The automaton's stored neighborhood (N_t).
    Neighbors,
    /// Automata found geometrically around the current location using the
    /// type's neighborhood specification.
    Nearby,
    /// Entity percepts produced this tick (agents only).
    Percepts,
}

impl Source {
    pub fn keyword(self) -> &'static str {
        match self {
            Source::Neighbors => "neighbors",
            Source::Nearby => "nearby",
            Source::Percepts => "percepts",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggOp {
    Count,
    Fraction,
    Sum,
    Min,
    Max,
}

impl AggOp {
    pub fn keyword(self) -> &'static str {
        match self {
            AggOp::Count => "count",
            AggOp::Fraction => "fraction",
            AggOp::Sum => "sum",
            AggOp::Min => "min",
            AggOp::Max => "max",
        }
    }

    /// Count and fraction take a predicate; the others a numeric body.
    pub fn takes_predicate(self) -> bool {
        matches!(self, AggOp::Count | AggOp::Fraction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

/// Attributes reachable through `self.` and `other.`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attr {
    Id,
    Type,
    X,
    Y,
    /// Distance from the evaluating automaton; only meaningful on `other`.
    Dist,
    Field(String),
}

impl Attr {
    pub const RESERVED: [&'static str; 5] = ["id", "type", "x", "y", "dist"];

    pub fn from_name(name: &str) -> Attr {
        match name {
            "id" => Attr::Id,
            "type" => Attr::Type,
            "x" => Attr::X,
            "y" => Attr::Y,
            "dist" => Attr::Dist,
            other => Attr::Field(other.to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Attr::Id => "id",
            Attr::Type => "type",
            Attr::X => "x",
            Attr::Y => "y",
            Attr::Dist => "dist",
            Attr::Field(f) => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Lit(Value),
    Param(String),
    Tick,
    SelfAttr(Attr),
    OtherAttr(Attr),
    Belief(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Agg {
        op: AggOp,
        source: Source,
        body: Box<Expr>,
    },
    /// Uniform draw in [0, 1) from the named stream.
    Random(String),
    /// Uniform choice among the options using the named stream.
    Choose(String, Vec<Expr>),
}

impl Expr {
    pub fn num(n: f64) -> Expr {
        Expr::Lit(Value::Num(n))
    }

    pub fn boolean(b: bool) -> Expr {
        Expr::Lit(Value::Bool(b))
    }

    pub fn sym(s: &str) -> Expr {
        Expr::Lit(Value::sym(s))
    }

    pub fn param(name: &str) -> Expr {
        Expr::Param(name.to_string())
    }

    pub fn field(name: &str) -> Expr {
        Expr::SelfAttr(Attr::Field(name.to_string()))
    }

    pub fn other(name: &str) -> Expr {
        Expr::OtherAttr(Attr::from_name(name))
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn agg(op: AggOp, source: Source, body: Expr) -> Expr {
        Expr::Agg {
            op,
            source,
            body: Box::new(body),
        }
    }

    /// Visits this node and all children, depth first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, a) => a.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::If(c, t, e) => {
                c.walk(f);
                t.walk(f);
                e.walk(f);
            }
            Expr::Agg { body, .. } => body.walk(f),
            Expr::Choose(_, opts) => opts.iter().for_each(|o| o.walk(f)),
            _ => {}
        }
    }
}

/// `target = value`; the target is a state field or a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assign {
    pub target: String,
    pub value: Expr,
}

impl Assign {
    pub fn new(target: &str, value: Expr) -> Self {
        Self {
            target: target.to_string(),
            value,
        }
    }
}

/// Movement rule body (M_L).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MoveExpr {
    Stay,
    /// Relative displacement.
    Step(Expr, Expr),
    /// Absolute target.
    Goto(Expr, Expr),
    /// Uniformly random unoccupied lattice cell, within a Moore radius when
    /// given, anywhere on the lattice otherwise. Stays put if none is free.
    RandomVacant {
        stream: String,
        radius: Option<Expr>,
    },
    If(Expr, Box<MoveExpr>, Box<MoveExpr>),
}

impl MoveExpr {
    pub fn exprs<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            MoveExpr::Stay => {}
            MoveExpr::Step(a, b) | MoveExpr::Goto(a, b) => {
                out.push(a);
                out.push(b);
            }
            MoveExpr::RandomVacant { radius, .. } => out.extend(radius.iter()),
            MoveExpr::If(c, t, e) => {
                out.push(c);
                t.exprs(out);
                e.exprs(out);
            }
        }
    }
}

/// Neighborhood rule body (R_N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NeighborExpr {
    /// Keep N_t.
    Static,
    /// Recompute from the type's neighborhood specification.
    Geometric,
    Empty,
    /// The k closest automata; ties go to the lowest id.
    Nearest(Expr),
    /// Members of N_t for which the predicate holds (`other` is the member).
    Filter(Expr),
    If(Expr, Box<NeighborExpr>, Box<NeighborExpr>),
}

impl NeighborExpr {
    pub fn exprs<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            NeighborExpr::Static | NeighborExpr::Geometric | NeighborExpr::Empty => {}
            NeighborExpr::Nearest(e) | NeighborExpr::Filter(e) => out.push(e),
            NeighborExpr::If(c, t, e) => {
                out.push(c);
                t.exprs(out);
                e.exprs(out);
            }
        }
    }
}
