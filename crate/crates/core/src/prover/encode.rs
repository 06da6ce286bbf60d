//! Translation of formulas into SMT-LIB terms.
//!
//! Every formula maps to a pair of terms: its definedness condition and its
//! value. A formula *holds* when both are true.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lang::{lookup, BinOp, Expr, Ident, Quantifier, Type, UnOp};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot encode `{expr}`: {msg}")]
pub struct EncodingError {
    pub expr: String,
    pub msg: String,
}

fn err(e: &Expr, msg: &str) -> EncodingError {
    EncodingError {
        expr: e.to_string(),
        msg: msg.to_string(),
    }
}

/// Symbolic value of a program variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SVal {
    Scalar(String),
    Array {
        null: String,
        len: String,
        data: String,
    },
}

impl SVal {
    pub fn scalar(&self) -> &str {
        match self {
            SVal::Scalar(s) => s,
            SVal::Array { .. } => panic!("array used as scalar"),
        }
    }
}

pub type State = BTreeMap<Ident, SVal>;

pub fn sort_of(t: Type) -> &'static str {
    match t {
        Type::Int => "Int",
        Type::Bool => "Bool",
        Type::IntArray => "(Array Int Int)",
    }
}

pub fn int_lit(n: i64) -> String {
    if n < 0 {
        format!("(- {})", (n as i128).abs())
    } else {
        n.to_string()
    }
}

pub fn and(parts: impl IntoIterator<Item = String>) -> String {
    let parts: Vec<String> = parts.into_iter().filter(|p| p != "true").collect();
    if parts.iter().any(|p| p == "false") {
        return "false".into();
    }
    match parts.len() {
        0 => "true".into(),
        1 => parts.into_iter().next().unwrap(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

pub fn or(parts: impl IntoIterator<Item = String>) -> String {
    let parts: Vec<String> = parts.into_iter().filter(|p| p != "false").collect();
    if parts.iter().any(|p| p == "true") {
        return "true".into();
    }
    match parts.len() {
        0 => "false".into(),
        1 => parts.into_iter().next().unwrap(),
        _ => format!("(or {})", parts.join(" ")),
    }
}

pub fn not(t: &str) -> String {
    match t {
        "true" => "false".into(),
        "false" => "true".into(),
        _ => format!("(not {t})"),
    }
}

pub fn implies(a: &str, b: &str) -> String {
    match (a, b) {
        ("true", _) => b.to_string(),
        ("false", _) | (_, "true") => "true".into(),
        _ => format!("(=> {a} {b})"),
    }
}

/// Truncating division and remainder over mathematical integers.
pub const PRELUDE: &str = "\
(define-fun tdiv ((x Int) (y Int)) Int \
(ite (>= x 0) (ite (> y 0) (div x y) (- (div x (- y)))) \
(ite (> y 0) (- (div (- x) y)) (div (- x) (- y)))))
(define-fun tmod ((x Int) (y Int)) Int (- x (* y (tdiv x y))))
";

/// Definedness and value terms of a formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enc {
    pub def: String,
    pub val: String,
}

impl Enc {
    pub fn holds(&self) -> String {
        and([self.def.clone(), self.val.clone()])
    }
}

/// Where a formula is evaluated.
pub struct Scope<'a> {
    pub types: &'a BTreeMap<Ident, Type>,
    pub cur: &'a State,
    pub old: &'a State,
    pub result: Option<&'a SVal>,
}

impl Scope<'_> {
    pub fn encode(&self, e: &Expr) -> Result<Enc, EncodingError> {
        let mut cx = Cx {
            scope: self,
            bound: Vec::new(),
            next_bound: 0,
        };
        cx.enc(e)
    }
}

struct Cx<'s, 'a> {
    scope: &'s Scope<'a>,
    bound: Vec<(Ident, String)>,
    next_bound: usize,
}

impl Cx<'_, '_> {
    fn is_array(&self, e: &Expr) -> bool {
        match e {
            Expr::Null => true,
            Expr::Var(v) | Expr::Old(v) => {
                !self.bound.iter().any(|(b, _)| b == v)
                    && self.scope.types.get(v) == Some(&Type::IntArray)
            }
            Expr::Result => matches!(self.scope.result, Some(SVal::Array { .. })),
            _ => false,
        }
    }

    fn lookup(&self, e: &Expr) -> Result<SVal, EncodingError> {
        let s = self.scope;
        let found = match e {
            Expr::Var(v) => {
                if let Some((_, sym)) = self.bound.iter().rev().find(|(b, _)| b == v) {
                    return Ok(SVal::Scalar(sym.clone()));
                }
                s.cur.get(v)
            }
            Expr::Old(v) => s.old.get(v),
            Expr::Result => s.result,
            _ => None,
        };
        found.cloned().ok_or_else(|| err(e, "unbound"))
    }

    fn array(&mut self, e: &Expr) -> Result<(String, SVal), EncodingError> {
        match e {
            Expr::Var(_) | Expr::Old(_) | Expr::Result => Ok(("true".into(), self.lookup(e)?)),
            _ => Err(err(e, "not an array variable")),
        }
    }

    fn enc(&mut self, e: &Expr) -> Result<Enc, EncodingError> {
        let ok = |val: String| Enc {
            def: "true".into(),
            val,
        };
        Ok(match e {
            Expr::Int(n) => ok(int_lit(*n)),
            Expr::Bool(b) => ok(b.to_string()),
            Expr::Null => return Err(err(e, "null outside a comparison")),
            Expr::Var(_) | Expr::Old(_) | Expr::Result => match self.lookup(e)? {
                SVal::Scalar(s) => ok(s),
                SVal::Array { .. } => return Err(err(e, "array outside a comparison")),
            },
            Expr::Unary(op, x) => {
                let x = self.enc(x)?;
                Enc {
                    def: x.def,
                    val: match op {
                        UnOp::Neg => format!("(- {})", x.val),
                        UnOp::Not => not(&x.val),
                    },
                }
            }
            Expr::Binary(op @ (BinOp::Eq | BinOp::Ne), l, r)
                if self.is_array(l) || self.is_array(r) =>
            {
                let null_of = |cx: &mut Self, x: &Expr| -> Result<String, EncodingError> {
                    match x {
                        Expr::Null => Ok("true".into()),
                        _ => match cx.array(x)?.1 {
                            SVal::Array { null, .. } => Ok(null),
                            SVal::Scalar(_) => Err(err(x, "expected array")),
                        },
                    }
                };
                let (ln, rn) = (null_of(self, l)?, null_of(self, r)?);
                let val = match (&**l, &**r) {
                    (Expr::Null, Expr::Null) => "true".into(),
                    (Expr::Null, _) => rn,
                    (_, Expr::Null) => ln,
                    _ => return Err(err(e, "arrays compare only with null")),
                };
                ok(if *op == BinOp::Eq { val } else { not(&val) })
            }
            Expr::Binary(op, l, r) => {
                let (l, r) = (self.enc(l)?, self.enc(r)?);
                let bin = |f: &str| format!("({f} {} {})", l.val, r.val);
                match op {
                    BinOp::And => Enc {
                        def: and([l.def.clone(), implies(&l.val, &r.def)]),
                        val: and([l.val.clone(), r.val.clone()]),
                    },
                    BinOp::Or => Enc {
                        def: and([l.def.clone(), or([l.val.clone(), r.def.clone()])]),
                        val: or([l.val.clone(), r.val.clone()]),
                    },
                    BinOp::Implies => Enc {
                        def: and([l.def.clone(), implies(&l.val, &r.def)]),
                        val: implies(&l.val, &r.val),
                    },
                    BinOp::Div | BinOp::Mod => Enc {
                        def: and([l.def.clone(), r.def.clone(), format!("(not (= {} 0))", r.val)]),
                        val: bin(if *op == BinOp::Div { "tdiv" } else { "tmod" }),
                    },
                    _ => Enc {
                        def: and([l.def.clone(), r.def.clone()]),
                        val: match op {
                            BinOp::Add => bin("+"),
                            BinOp::Sub => bin("-"),
                            BinOp::Mul => bin("*"),
                            BinOp::Eq => bin("="),
                            BinOp::Ne => format!("(not (= {} {}))", l.val, r.val),
                            BinOp::Lt => bin("<"),
                            BinOp::Le => bin("<="),
                            BinOp::Gt => bin(">"),
                            BinOp::Ge => bin(">="),
                            _ => unreachable!(),
                        },
                    },
                }
            }
            Expr::Index(a, i) => {
                let (adef, a) = self.array(a)?;
                let i = self.enc(i)?;
                let SVal::Array { null, len, data } = a else {
                    return Err(err(e, "indexing a scalar"));
                };
                Enc {
                    def: and([
                        adef,
                        i.def,
                        not(&null),
                        format!("(<= 0 {})", i.val),
                        format!("(< {} {len})", i.val),
                    ]),
                    val: format!("(select {data} {})", i.val),
                }
            }
            Expr::Length(a) => {
                let (adef, a) = self.array(a)?;
                let SVal::Array { null, len, .. } = a else {
                    return Err(err(e, "length of a scalar"));
                };
                Enc {
                    def: and([adef, not(&null)]),
                    val: len,
                }
            }
            Expr::Quant {
                q,
                var,
                lo,
                hi,
                body,
            } => {
                let (lo, hi) = (self.enc(lo)?, self.enc(hi)?);
                self.next_bound += 1;
                let sym = format!("{var}.q{}", self.next_bound);
                self.bound.push((var.clone(), sym.clone()));
                let b = self.enc(body);
                self.bound.pop();
                let b = b?;
                let range = format!("(and (<= {} {sym}) (< {sym} {}))", lo.val, hi.val);
                let all = |t: &str| -> String {
                    if t == "true" {
                        "true".into()
                    } else {
                        format!("(forall (({sym} Int)) (=> {range} {t}))")
                    }
                };
                Enc {
                    def: and([lo.def, hi.def, all(&b.def)]),
                    val: match q {
                        Quantifier::Forall => all(&b.val),
                        Quantifier::Exists => {
                            format!("(exists (({sym} Int)) (and {range} {}))", b.val)
                        }
                    },
                }
            }
            Expr::Call(name, args) => {
                let def = lookup(name).ok_or_else(|| err(e, "unknown predicate"))?;
                let mut defs = Vec::new();
                for (a, (_, t)) in args.iter().zip(&def.params) {
                    if *t == Type::IntArray {
                        defs.push(self.array(a)?.0);
                    } else {
                        defs.push(self.enc(a)?.def);
                    }
                }
                let dom = self.enc(&def.domain_at(args))?;
                defs.push(dom.holds());
                let body = self.enc(&def.body_at(args))?;
                Enc {
                    def: and(defs),
                    val: body.val,
                }
            }
        })
    }
}
