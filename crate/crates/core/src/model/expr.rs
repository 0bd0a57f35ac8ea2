//! Guard and action expression language.
//!
//! Expressions are a small typed language over 64-bit signed integers and
//! booleans. Printing follows the compact style used in guideline charts:
//! arithmetic and comparison operators are written without surrounding
//! spaces (`tpaT-onsetT<=180`), logical connectives with them
//! (`orderCT && RES.tPA`). The printer inserts the minimal parentheses needed
//! for the parser to rebuild the exact same tree.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKind {
    #[serde(rename = "int")]
    Integer,
    #[serde(rename = "bool")]
    Boolean,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarKind::Integer => f.write_str("int"),
            VarKind::Boolean => f.write_str("bool"),
        }
    }
}

/// A runtime value. Serialized as a bare JSON bool or integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
}

impl Value {
    pub fn kind(self) -> VarKind {
        match self {
            Value::Bool(_) => VarKind::Boolean,
            Value::Int(_) => VarKind::Integer,
        }
    }

    pub fn default_for(kind: VarKind) -> Value {
        match kind {
            VarKind::Integer => Value::Int(0),
            VarKind::Boolean => Value::Bool(false),
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            Value::Int(_) => None,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(i),
            Value::Bool(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

const UNARY_PRECEDENCE: u8 = 6;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::And, lhs, rhs)
    }

    pub fn is_true_literal(&self) -> bool {
        matches!(self, Expr::Bool(true))
    }

    /// Variables referenced by the expression, in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Var(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Expr::Not(e) | Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Int(_) | Expr::Bool(_) => {}
        }
    }

    /// Rename every variable through `f`. Used by exporters.
    pub fn map_vars(&self, f: &impl Fn(&str) -> String) -> Expr {
        match self {
            Expr::Var(name) => Expr::Var(f(name)),
            Expr::Not(e) => Expr::Not(Box::new(e.map_vars(f))),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map_vars(f))),
            Expr::Binary { op, lhs, rhs } => Expr::binary(*op, lhs.map_vars(f), rhs.map_vars(f)),
            other => other.clone(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.precedence(),
            Expr::Not(_) | Expr::Neg(_) => UNARY_PRECEDENCE,
            // A negative literal prints with a leading minus, so it needs the
            // same protection as a unary operand.
            Expr::Int(i) if *i < 0 => UNARY_PRECEDENCE,
            _ => UNARY_PRECEDENCE + 1,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Not(inner) => {
                f.write_str("!")?;
                write_operand(f, inner, inner.precedence() < UNARY_PRECEDENCE)
            }
            Expr::Neg(inner) => {
                f.write_str("-")?;
                // `-5` would reparse as a negative literal.
                let parens = inner.precedence() < UNARY_PRECEDENCE || matches!(**inner, Expr::Int(_) | Expr::Neg(_));
                write_operand(f, inner, parens)
            }
            Expr::Binary { op, lhs, rhs } => {
                let prec = op.precedence();
                let lhs_parens = if op.is_comparison() {
                    lhs.precedence() <= prec
                } else {
                    lhs.precedence() < prec
                };
                let rhs_parens = rhs.precedence() <= prec;
                write_operand(f, lhs, lhs_parens)?;
                if op.is_logical() {
                    write!(f, " {} ", op.symbol())?;
                } else {
                    f.write_str(op.symbol())?;
                }
                if *op == BinOp::Sub && !rhs_parens && starts_with_minus(rhs) {
                    // `a--1` is legal but unreadable
                    f.write_str("(")?;
                    write!(f, "{rhs}")?;
                    return f.write_str(")");
                }
                write_operand(f, rhs, rhs_parens)
            }
        }
    }
}

fn starts_with_minus(e: &Expr) -> bool {
    match e {
        Expr::Neg(_) => true,
        Expr::Int(i) => *i < 0,
        Expr::Binary { lhs, .. } => starts_with_minus(lhs),
        _ => false,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("operator `{op}` expects {expected} operands, found {found}")]
    Operand {
        op: &'static str,
        expected: VarKind,
        found: VarKind,
    },
    #[error("operator `{op}` compares {lhs} with {rhs}")]
    Mismatch {
        op: &'static str,
        lhs: VarKind,
        rhs: VarKind,
    },
}

/// Infer the type of `expr`, resolving variable kinds through `lookup`.
pub fn type_of(expr: &Expr, lookup: &impl Fn(&str) -> Option<VarKind>) -> Result<VarKind, TypeError> {
    use VarKind::*;
    let expect = |op: &'static str, e: &Expr, want: VarKind| -> Result<(), TypeError> {
        let found = type_of(e, lookup)?;
        if found == want {
            Ok(())
        } else {
            Err(TypeError::Operand {
                op,
                expected: want,
                found,
            })
        }
    };
    match expr {
        Expr::Int(_) => Ok(Integer),
        Expr::Bool(_) => Ok(Boolean),
        Expr::Var(name) => lookup(name).ok_or_else(|| TypeError::UnknownVariable(name.clone())),
        Expr::Not(e) => expect("!", e, Boolean).map(|_| Boolean),
        Expr::Neg(e) => expect("-", e, Integer).map(|_| Integer),
        Expr::Binary { op, lhs, rhs } => match op {
            BinOp::Add | BinOp::Sub | BinOp::Mul => {
                expect(op.symbol(), lhs, Integer)?;
                expect(op.symbol(), rhs, Integer)?;
                Ok(Integer)
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                expect(op.symbol(), lhs, Integer)?;
                expect(op.symbol(), rhs, Integer)?;
                Ok(Boolean)
            }
            BinOp::Eq | BinOp::Ne => {
                let l = type_of(lhs, lookup)?;
                let r = type_of(rhs, lookup)?;
                if l == r {
                    Ok(Boolean)
                } else {
                    Err(TypeError::Mismatch {
                        op: op.symbol(),
                        lhs: l,
                        rhs: r,
                    })
                }
            }
            BinOp::And | BinOp::Or => {
                expect(op.symbol(), lhs, Boolean)?;
                expect(op.symbol(), rhs, Boolean)?;
                Ok(Boolean)
            }
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("ill-typed operand for `{0}`")]
    IllTyped(&'static str),
}

/// Read access to variable values during evaluation.
pub trait Valuation {
    fn value_of(&self, name: &str) -> Option<Value>;
}

impl Valuation for BTreeMap<String, Value> {
    fn value_of(&self, name: &str) -> Option<Value> {
        self.get(name).copied()
    }
}

impl Valuation for HashMap<String, Value> {
    fn value_of(&self, name: &str) -> Option<Value> {
        self.get(name).copied()
    }
}

impl<F: Fn(&str) -> Option<Value>> Valuation for F {
    fn value_of(&self, name: &str) -> Option<Value> {
        self(name)
    }
}

/// Evaluate with strict semantics: both operands of every binary operator
/// are evaluated. Integer arithmetic wraps on overflow.
pub fn eval_expr(expr: &Expr, valuation: &impl Valuation) -> Result<Value, EvalError> {
    let int = |e: &Expr, op: &'static str| -> Result<i64, EvalError> {
        eval_expr(e, valuation)?.as_int().ok_or(EvalError::IllTyped(op))
    };
    let boolean = |e: &Expr, op: &'static str| -> Result<bool, EvalError> {
        eval_expr(e, valuation)?.as_bool().ok_or(EvalError::IllTyped(op))
    };
    Ok(match expr {
        Expr::Int(i) => Value::Int(*i),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Var(name) => valuation
            .value_of(name)
            .ok_or_else(|| EvalError::Unbound(name.clone()))?,
        Expr::Not(e) => Value::Bool(!boolean(e, "!")?),
        Expr::Neg(e) => Value::Int(int(e, "-")?.wrapping_neg()),
        Expr::Binary { op, lhs, rhs } => {
            let sym = op.symbol();
            match op {
                BinOp::Add => Value::Int(int(lhs, sym)?.wrapping_add(int(rhs, sym)?)),
                BinOp::Sub => Value::Int(int(lhs, sym)?.wrapping_sub(int(rhs, sym)?)),
                BinOp::Mul => Value::Int(int(lhs, sym)?.wrapping_mul(int(rhs, sym)?)),
                BinOp::Lt => Value::Bool(int(lhs, sym)? < int(rhs, sym)?),
                BinOp::Le => Value::Bool(int(lhs, sym)? <= int(rhs, sym)?),
                BinOp::Gt => Value::Bool(int(lhs, sym)? > int(rhs, sym)?),
                BinOp::Ge => Value::Bool(int(lhs, sym)? >= int(rhs, sym)?),
                BinOp::Eq | BinOp::Ne => {
                    let l = eval_expr(lhs, valuation)?;
                    let r = eval_expr(rhs, valuation)?;
                    if l.kind() != r.kind() {
                        return Err(EvalError::IllTyped(sym));
                    }
                    Value::Bool((l == r) == (*op == BinOp::Eq))
                }
                BinOp::And => {
                    let l = boolean(lhs, sym)?;
                    let r = boolean(rhs, sym)?;
                    Value::Bool(l && r)
                }
                BinOp::Or => {
                    let l = boolean(lhs, sym)?;
                    let r = boolean(rhs, sym)?;
                    Value::Bool(l || r)
                }
            }
        }
    })
}

/// Evaluate a boolean guard.
pub fn eval_guard(expr: &Expr, valuation: &impl Valuation) -> Result<bool, EvalError> {
    eval_expr(expr, valuation)?
        .as_bool()
        .ok_or(EvalError::IllTyped("guard"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse::parse_expr;

    fn vals(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn tpa_eligibility_guard() {
        let e = parse_expr("systolicBP<=185 && diastolicBP<=110 && !hemorrhage").unwrap();
        let v = vals(&[
            ("systolicBP", Value::Int(150)),
            ("diastolicBP", Value::Int(100)),
            ("hemorrhage", Value::Bool(false)),
        ]);
        assert_eq!(eval_expr(&e, &v), Ok(Value::Bool(true)));
    }

    #[test]
    fn treatment_window_exceeded() {
        let e = parse_expr("tpaT-onsetT<=180").unwrap();
        let v = vals(&[("tpaT", Value::Int(200)), ("onsetT", Value::Int(0))]);
        assert_eq!(eval_expr(&e, &v), Ok(Value::Bool(false)));
    }

    #[test]
    fn true_is_and_identity() {
        let e = parse_expr("true && x").unwrap();
        let v = vals(&[("x", Value::Bool(false))]);
        assert_eq!(eval_expr(&e, &v), Ok(Value::Bool(false)));
    }

    #[test]
    fn unbound_variable_is_named() {
        let e = parse_expr("a + 1 > 2").unwrap();
        let v = vals(&[]);
        assert_eq!(eval_expr(&e, &v), Err(EvalError::Unbound("a".into())));
    }

    #[test]
    fn strict_evaluation_reports_unbound_rhs() {
        // `false && y` still evaluates y
        let e = parse_expr("false && y").unwrap();
        assert_eq!(eval_expr(&e, &vals(&[])), Err(EvalError::Unbound("y".into())));
    }

    #[test]
    fn arithmetic_wraps() {
        let e = Expr::binary(BinOp::Add, Expr::Int(i64::MAX), Expr::Int(1));
        assert_eq!(eval_expr(&e, &vals(&[])), Ok(Value::Int(i64::MIN)));
    }

    #[test]
    fn printing_matches_chart_style() {
        for src in [
            "tpaT-onsetT<=180",
            "orderCT && RES.CT_machine && RES.CT_technician",
            "systolicBP<=185 && diastolicBP<=110 && !hemorrhage",
            "curT>200",
            "curT+1",
            "a-(b-c)",
            "(a || b) && c",
            "!(x && y)",
            "-(5)",
            "-x*3",
            "(a<b)==(c<d)",
        ] {
            assert_eq!(parse_expr(src).unwrap().to_string(), src);
        }
    }

    #[test]
    fn bool_compared_to_int_is_a_type_error() {
        let e = parse_expr("hemorrhage == 3").unwrap();
        let lookup = |n: &str| match n {
            "hemorrhage" => Some(VarKind::Boolean),
            _ => None,
        };
        assert!(matches!(type_of(&e, &lookup), Err(TypeError::Mismatch { .. })));
    }
}
