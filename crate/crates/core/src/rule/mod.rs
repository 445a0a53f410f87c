//! Rule expressions: the small typed language behind transition, movement and
//! neighborhood rules, perception filters, action preconditions, goal
//! conditions and parameter functions.

mod ast;
mod eval;
mod typeck;

pub use ast::{AggOp, Assign, Attr, BinOp, Expr, MoveExpr, NeighborExpr, Source, UnOp};
pub use eval::{eval, eval_bool, eval_for, eval_num, EvalError, Member, Scope, StreamSet};
pub use typeck::{check_expr, TypeEnv};
