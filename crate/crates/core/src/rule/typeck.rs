use std::collections::BTreeMap;

use super::ast::{Attr, BinOp, Expr, Source, UnOp};
use crate::value::Ty;

/// What an expression may refer to at a given use site.
#[derive(Debug, Clone, Copy)]
pub struct TypeEnv<'a> {
    /// State schema of the evaluating automaton; `None` where there is no
    /// `self` (parameter functions).
    pub self_fields: Option<&'a BTreeMap<String, Ty>>,
    /// Union of all declared state schemas, used for `other.` fields.
    pub other_fields: &'a BTreeMap<String, Ty>,
    pub params: &'a BTreeMap<String, Ty>,
    pub sources: &'a [Source],
    pub beliefs: bool,
    pub random: bool,
}

/// Infers the type of `expr`, returning every problem found.
pub fn check_expr(expr: &Expr, env: &TypeEnv<'_>) -> Result<Ty, Vec<String>> {
    let mut errors = Vec::new();
    let ty = infer(expr, env, false, &mut errors);
    if errors.is_empty() {
        Ok(ty)
    } else {
        Err(errors)
    }
}

fn want(ty: Ty, expected: Ty, what: &str, errors: &mut Vec<String>) {
    if !expected.accepts(ty) {
        errors.push(format!("type error: {what} expects {expected}, found {ty}"));
    }
}

fn attr_ty(attr: &Attr, fields: Option<&BTreeMap<String, Ty>>, owner: &str, errors: &mut Vec<String>) -> Ty {
    match attr {
        Attr::Id | Attr::X | Attr::Y | Attr::Dist => Ty::Num,
        Attr::Type => Ty::Sym,
        Attr::Field(f) => match fields.and_then(|m| m.get(f)) {
            Some(t) => *t,
            None => {
                errors.push(format!("unknown state field `{owner}.{f}`"));
                Ty::Any
            }
        },
    }
}

fn infer(expr: &Expr, env: &TypeEnv<'_>, in_agg: bool, errors: &mut Vec<String>) -> Ty {
    match expr {
        Expr::Lit(v) => v.ty(),
        Expr::Tick => Ty::Num,
        Expr::Param(name) => match env.params.get(name) {
            Some(t) => *t,
            None => {
                errors.push(format!("undeclared parameter `{name}`"));
                Ty::Any
            }
        },
        Expr::SelfAttr(attr) => {
            if env.self_fields.is_none() {
                errors.push(format!("`self.{}` is not available here", attr.name()));
                return Ty::Any;
            }
            if *attr == Attr::Dist {
                errors.push("`self.dist` is meaningless; use `other.dist`".into());
                return Ty::Num;
            }
            attr_ty(attr, env.self_fields, "self", errors)
        }
        Expr::OtherAttr(attr) => {
            if !in_agg {
                errors.push(format!("`other.{}` used outside an aggregate", attr.name()));
                return Ty::Any;
            }
            attr_ty(attr, Some(env.other_fields), "other", errors)
        }
        Expr::Belief(key) => {
            if !env.beliefs {
                errors.push(format!("belief `{key}` is not available here"));
            }
            Ty::Any
        }
        Expr::Unary(op, a) => {
            let t = infer(a, env, in_agg, errors);
            match op {
                UnOp::Neg | UnOp::Abs => {
                    want(t, Ty::Num, if *op == UnOp::Neg { "negation" } else { "abs" }, errors);
                    Ty::Num
                }
                UnOp::Not => {
                    want(t, Ty::Bool, "not", errors);
                    Ty::Bool
                }
            }
        }
        Expr::Binary(op, a, b) => {
            let l = infer(a, env, in_agg, errors);
            let r = infer(b, env, in_agg, errors);
            let what = format!("`{}`", op.symbol());
            match op {
                BinOp::And | BinOp::Or => {
                    want(l, Ty::Bool, &what, errors);
                    want(r, Ty::Bool, &what, errors);
                    Ty::Bool
                }
                BinOp::Eq | BinOp::Ne => {
                    if !l.accepts(r) {
                        errors.push(format!("type error: {what} compares {l} with {r}"));
                    }
                    Ty::Bool
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    want(l, Ty::Num, &what, errors);
                    want(r, Ty::Num, &what, errors);
                    Ty::Bool
                }
                _ => {
                    want(l, Ty::Num, &what, errors);
                    want(r, Ty::Num, &what, errors);
                    Ty::Num
                }
            }
        }
        Expr::If(c, t, e) => {
            let ct = infer(c, env, in_agg, errors);
            want(ct, Ty::Bool, "if condition", errors);
            let tt = infer(t, env, in_agg, errors);
            let et = infer(e, env, in_agg, errors);
            if !tt.accepts(et) {
                errors.push(format!("type error: if branches differ ({tt} vs {et})"));
            }
            if tt == Ty::Any {
                et
            } else {
                tt
            }
        }
        Expr::Agg { op, source, body } => {
            if !env.sources.contains(source) {
                errors.push(format!("`{}` is not available here", source.keyword()));
            }
            let bt = infer(body, env, true, errors);
            if op.takes_predicate() {
                want(bt, Ty::Bool, op.keyword(), errors);
            } else {
                want(bt, Ty::Num, op.keyword(), errors);
            }
            Ty::Num
        }
        Expr::Random(stream) => {
            if !env.random {
                errors.push(format!("random stream `{stream}` is not available here"));
            }
            Ty::Num
        }
        Expr::Choose(stream, options) => {
            if !env.random {
                errors.push(format!("random stream `{stream}` is not available here"));
            }
            if options.is_empty() {
                errors.push("choose needs at least one option".into());
                return Ty::Any;
            }
            let first = infer(&options[0], env, in_agg, errors);
            let mut ty = first;
            for o in &options[1..] {
                let t = infer(o, env, in_agg, errors);
                if !ty.accepts(t) {
                    errors.push(format!("type error: choose options differ ({ty} vs {t})"));
                }
                if ty == Ty::Any {
                    ty = t;
                }
            }
            ty
        }
    }
}
