//! Formulas compiled to slot-indexed form and their runtime evaluation.

use thiserror::Error;

use super::value::{Layout, Value};
use crate::lang::predicates::{self, ExecFn, PredArg};
use crate::lang::{BinOp, Expr, Formula, Quantifier, UnOp};

#[derive(Clone, Debug, Error, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[error("null dereference")]
    NullAccess,
    #[error("index out of bounds")]
    OutOfBounds,
    #[error("division by zero")]
    DivByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("predicate `{0}` applied outside its domain")]
    PredicateDomain(String),
    #[error("quantifier range too large")]
    RangeTooLarge,
    #[error("`\\result` has no value here")]
    NoResult,
    #[error("unbound identifier `{0}`")]
    Unbound(String),
}

/// Evaluation failed because some part of the formula is undefined.
pub type DefinednessError = Fault;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("unbound identifier `{0}`")]
pub struct CompileError(pub String);

const MAX_RANGE: i64 = 1 << 20;

#[derive(Clone, Debug)]
pub enum CExpr {
    Int(i64),
    Bool(bool),
    Null,
    Var(usize),
    Old(usize),
    Result,
    Bound(usize),
    Neg(Box<CExpr>),
    Not(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Index(Box<CExpr>, Box<CExpr>),
    Length(Box<CExpr>),
    Quant {
        forall: bool,
        lo: Box<CExpr>,
        hi: Box<CExpr>,
        body: Box<CExpr>,
    },
    Call(&'static str, ExecFn, Vec<CExpr>),
}

pub fn compile(e: &Formula, layout: &Layout) -> Result<CExpr, CompileError> {
    compile_in(e, layout, &mut Vec::new())
}

fn compile_in(e: &Expr, layout: &Layout, bound: &mut Vec<String>) -> Result<CExpr, CompileError> {
    let slot = |n: &str| layout.slot(n).ok_or_else(|| CompileError(n.to_string()));
    let sub = |x: &Expr, bound: &mut Vec<String>| compile_in(x, layout, bound).map(Box::new);
    Ok(match e {
        Expr::Int(n) => CExpr::Int(*n),
        Expr::Bool(b) => CExpr::Bool(*b),
        Expr::Null => CExpr::Null,
        Expr::Var(v) => match bound.iter().rposition(|b| b == v) {
            Some(i) => CExpr::Bound(i),
            None => CExpr::Var(slot(v)?),
        },
        Expr::Old(v) => CExpr::Old(slot(v)?),
        Expr::Result => CExpr::Result,
        Expr::Unary(UnOp::Neg, x) => CExpr::Neg(sub(x, bound)?),
        Expr::Unary(UnOp::Not, x) => CExpr::Not(sub(x, bound)?),
        Expr::Binary(op, l, r) => CExpr::Bin(*op, sub(l, bound)?, sub(r, bound)?),
        Expr::Index(a, i) => CExpr::Index(sub(a, bound)?, sub(i, bound)?),
        Expr::Length(a) => CExpr::Length(sub(a, bound)?),
        Expr::Quant {
            q,
            var,
            lo,
            hi,
            body,
        } => {
            let lo = sub(lo, bound)?;
            let hi = sub(hi, bound)?;
            bound.push(var.clone());
            let body = sub(body, bound);
            bound.pop();
            CExpr::Quant {
                forall: *q == Quantifier::Forall,
                lo,
                hi,
                body: body?,
            }
        }
        Expr::Call(name, args) => {
            let def = predicates::lookup(name).ok_or_else(|| CompileError(name.clone()))?;
            let args = args
                .iter()
                .map(|a| compile_in(a, layout, bound))
                .collect::<Result<Vec<_>, _>>()?;
            CExpr::Call(def.name, def.exec, args)
        }
    })
}

/// Runtime value during evaluation; arrays borrow from the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RV<'a> {
    I(i64),
    B(bool),
    A(Option<&'a [i64]>),
}

impl<'a> RV<'a> {
    fn of(v: &'a Value) -> RV<'a> {
        match v {
            Value::Int(n) => RV::I(*n),
            Value::Bool(b) => RV::B(*b),
            Value::Null => RV::A(None),
            Value::Array(a) => RV::A(Some(a)),
        }
    }

    fn int(self) -> i64 {
        match self {
            RV::I(n) => n,
            other => panic!("ill-typed evaluation: expected int, got {other:?}"),
        }
    }

    fn boolean(self) -> bool {
        match self {
            RV::B(b) => b,
            other => panic!("ill-typed evaluation: expected bool, got {other:?}"),
        }
    }

    fn array(self) -> Option<&'a [i64]> {
        match self {
            RV::A(a) => a,
            other => panic!("ill-typed evaluation: expected array, got {other:?}"),
        }
    }

    pub fn to_value(self) -> Value {
        match self {
            RV::I(n) => Value::Int(n),
            RV::B(b) => Value::Bool(b),
            RV::A(None) => Value::Null,
            RV::A(Some(a)) => Value::Array(a.to_vec()),
        }
    }
}

pub struct Ctx<'a> {
    pub cur: &'a [Value],
    pub old: &'a [Value],
    pub result: Option<&'a Value>,
}

pub fn arith(op: BinOp, a: i64, b: i64) -> Result<i64, Fault> {
    let r = match op {
        BinOp::Add => a.checked_add(b),
        BinOp::Sub => a.checked_sub(b),
        BinOp::Mul => a.checked_mul(b),
        BinOp::Div | BinOp::Mod if b == 0 => return Err(Fault::DivByZero),
        // truncated division, as in the logic
        BinOp::Div => a.checked_div(b),
        BinOp::Mod => a.checked_rem(b),
        _ => unreachable!("not arithmetic"),
    };
    r.ok_or(Fault::Overflow)
}

fn index(a: Option<&[i64]>, i: i64) -> Result<i64, Fault> {
    let a = a.ok_or(Fault::NullAccess)?;
    if i < 0 || i >= a.len() as i64 {
        return Err(Fault::OutOfBounds);
    }
    Ok(a[i as usize])
}

impl<'a> Ctx<'a> {
    pub fn eval_bool(&self, e: &CExpr) -> Result<bool, Fault> {
        let mut bound = Vec::new();
        self.eval(e, &mut bound).map(RV::boolean)
    }

    pub fn eval(&self, e: &CExpr, bound: &mut Vec<i64>) -> Result<RV<'a>, Fault> {
        Ok(match e {
            CExpr::Int(n) => RV::I(*n),
            CExpr::Bool(b) => RV::B(*b),
            CExpr::Null => RV::A(None),
            CExpr::Var(s) => RV::of(&self.cur[*s]),
            CExpr::Old(s) => RV::of(&self.old[*s]),
            CExpr::Result => RV::of(self.result.ok_or(Fault::NoResult)?),
            CExpr::Bound(i) => RV::I(bound[*i]),
            CExpr::Neg(x) => RV::I(self.eval(x, bound)?.int().checked_neg().ok_or(Fault::Overflow)?),
            CExpr::Not(x) => RV::B(!self.eval(x, bound)?.boolean()),
            CExpr::Bin(op, l, r) => match op {
                BinOp::And => {
                    RV::B(self.eval(l, bound)?.boolean() && self.eval(r, bound)?.boolean())
                }
                BinOp::Or => {
                    RV::B(self.eval(l, bound)?.boolean() || self.eval(r, bound)?.boolean())
                }
                BinOp::Implies => {
                    RV::B(!self.eval(l, bound)?.boolean() || self.eval(r, bound)?.boolean())
                }
                _ => {
                    let lv = self.eval(l, bound)?;
                    let rv = self.eval(r, bound)?;
                    match op {
                        BinOp::Eq => RV::B(lv == rv),
                        BinOp::Ne => RV::B(lv != rv),
                        BinOp::Lt => RV::B(lv.int() < rv.int()),
                        BinOp::Le => RV::B(lv.int() <= rv.int()),
                        BinOp::Gt => RV::B(lv.int() > rv.int()),
                        BinOp::Ge => RV::B(lv.int() >= rv.int()),
                        _ => RV::I(arith(*op, lv.int(), rv.int())?),
                    }
                }
            },
            CExpr::Index(a, i) => {
                let a = self.eval(a, bound)?.array();
                let i = self.eval(i, bound)?.int();
                RV::I(index(a, i)?)
            }
            CExpr::Length(a) => {
                let a = self.eval(a, bound)?.array().ok_or(Fault::NullAccess)?;
                RV::I(a.len() as i64)
            }
            CExpr::Quant {
                forall,
                lo,
                hi,
                body,
            } => {
                let lo = self.eval(lo, bound)?.int();
                let hi = self.eval(hi, bound)?.int();
                if hi.saturating_sub(lo) > MAX_RANGE {
                    return Err(Fault::RangeTooLarge);
                }
                // strict: every instance must be defined, so no early exit on the value
                let mut acc = *forall;
                for k in lo..hi.max(lo) {
                    bound.push(k);
                    let v = self.eval(body, bound);
                    bound.pop();
                    let v = v?.boolean();
                    if *forall {
                        acc &= v;
                    } else {
                        acc |= v;
                    }
                }
                RV::B(acc)
            }
            CExpr::Call(name, exec, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(match self.eval(a, bound)? {
                        RV::I(n) => PredArg::Int(n),
                        RV::A(a) => PredArg::Array(a),
                        RV::B(_) => panic!("boolean predicate argument"),
                    });
                }
                RV::B(exec(&vals).ok_or_else(|| Fault::PredicateDomain(name.to_string()))?)
            }
        })
    }
}
