use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub type Ident = String;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    IntArray,
}

impl std::fmt::Display for Type {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Bool => "bool",
            Type::IntArray => "int[]",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "==>",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Implies => 1,
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne => 4,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 7,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod
        )
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Implies)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantifier {
    Forall,
    Exists,
}

/// Expressions of both the statement language and the specification language.
///
/// Statement expressions are the subset without `\old`, `\result`, quantifiers,
/// predicate calls and implication; the typechecker enforces the split.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Null,
    Var(Ident),
    Old(Ident),
    Result,
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Length(Box<Expr>),
    /// Bounded quantifier over the half-open range `[lo, hi)`.
    Quant {
        q: Quantifier,
        var: Ident,
        lo: Box<Expr>,
        hi: Box<Expr>,
        body: Box<Expr>,
    },
    Call(Ident, Vec<Expr>),
}

/// A specification-language expression.
pub type Formula = Expr;

impl Expr {
    pub fn var(name: impl Into<Ident>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn implies(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Implies, l, r)
    }

    pub fn and_all(mut parts: Vec<Expr>) -> Expr {
        match parts.len() {
            0 => Expr::Bool(true),
            1 => parts.pop().unwrap(),
            _ => {
                let mut it = parts.into_iter();
                let first = it.next().unwrap();
                it.fold(first, |acc, e| Expr::bin(BinOp::And, acc, e))
            }
        }
    }

    pub fn or_all(mut parts: Vec<Expr>) -> Expr {
        match parts.len() {
            0 => Expr::Bool(false),
            1 => parts.pop().unwrap(),
            _ => {
                let mut it = parts.into_iter();
                let first = it.next().unwrap();
                it.fold(first, |acc, e| Expr::bin(BinOp::Or, acc, e))
            }
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_)
            | Expr::Bool(_)
            | Expr::Null
            | Expr::Var(_)
            | Expr::Old(_)
            | Expr::Result => vec![],
            Expr::Unary(_, e) | Expr::Length(e) => vec![e],
            Expr::Binary(_, l, r) | Expr::Index(l, r) => vec![l, r],
            Expr::Quant { lo, hi, body, .. } => vec![lo, hi, body],
            Expr::Call(_, args) => args.iter().collect(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Int(_)
            | Expr::Bool(_)
            | Expr::Null
            | Expr::Var(_)
            | Expr::Old(_)
            | Expr::Result => vec![],
            Expr::Unary(_, e) | Expr::Length(e) => vec![e],
            Expr::Binary(_, l, r) | Expr::Index(l, r) => vec![l, r],
            Expr::Quant { lo, hi, body, .. } => vec![lo, hi, body],
            Expr::Call(_, args) => args.iter_mut().collect(),
        }
    }

    pub fn contains_result(&self) -> bool {
        matches!(self, Expr::Result) || self.children().into_iter().any(Expr::contains_result)
    }

    pub fn contains_old(&self) -> bool {
        matches!(self, Expr::Old(_)) || self.children().into_iter().any(Expr::contains_old)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().into_iter().map(Expr::node_count).sum::<usize>()
    }

    /// Free program variables (quantifier-bound names excluded).
    pub fn free_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match self {
            Expr::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Expr::Quant { var, lo, hi, body, .. } => {
                lo.collect_free(bound, out);
                hi.collect_free(bound, out);
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    /// Integer literals occurring anywhere in the expression.
    pub fn literals(&self, out: &mut BTreeSet<i64>) {
        if let Expr::Int(n) = self {
            out.insert(*n);
        }
        for c in self.children() {
            c.literals(out);
        }
    }

    /// Names of predicate calls occurring in the expression.
    pub fn called_predicates(&self, out: &mut BTreeSet<Ident>) {
        if let Expr::Call(name, _) = self {
            out.insert(name.clone());
        }
        for c in self.children() {
            c.called_predicates(out);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Skip,
    Assign {
        target: Ident,
        rhs: Expr,
    },
    Store {
        array: Ident,
        index: Expr,
        rhs: Expr,
    },
    If {
        id: usize,
        cond: Expr,
        then: Box<Stmt>,
        els: Box<Stmt>,
    },
    While {
        id: usize,
        cond: Expr,
        /// Golden invariants written at the loop head; never fed to inference.
        invariants: Vec<Formula>,
        body: Box<Stmt>,
    },
    Seq(Vec<Stmt>),
}

impl Stmt {
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::If { then, els, .. } => {
                then.walk(f);
                els.walk(f);
            }
            Stmt::While { body, .. } => body.walk(f),
            Stmt::Seq(items) => {
                for s in items {
                    s.walk(f);
                }
            }
            _ => {}
        }
    }

    /// Variables assigned or stored into anywhere in this statement.
    pub fn modified_vars(&self) -> BTreeSet<Ident> {
        let mut out = BTreeSet::new();
        self.walk(&mut |s| match s {
            Stmt::Assign { target, .. } => {
                out.insert(target.clone());
            }
            Stmt::Store { array, .. } => {
                out.insert(array.clone());
            }
            _ => {}
        });
        out
    }
}

/// Static information about one `while` statement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopSite {
    /// Preorder index over all loops of the method.
    pub id: usize,
    pub depth: usize,
    pub guard: Expr,
    pub modified_vars: BTreeSet<Ident>,
    pub in_scope_vars: BTreeSet<Ident>,
    pub golden: Vec<Formula>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub name: Ident,
    pub params: Vec<(Ident, Type)>,
    /// Declared output variable; `\result` denotes its final value.
    pub ret: Option<(Ident, Type)>,
    pub locals: Vec<(Ident, Type)>,
    pub pre: Vec<Formula>,
    pub post: Vec<Formula>,
    pub body: Stmt,
    pub loops: Vec<LoopSite>,
}

impl Program {
    /// Parameters, then the output variable, then locals.
    pub fn all_vars(&self) -> Vec<(Ident, Type)> {
        let mut v = self.params.clone();
        if let Some(r) = &self.ret {
            v.push(r.clone());
        }
        v.extend(self.locals.iter().cloned());
        v
    }

    pub fn var_type(&self, name: &str) -> Option<Type> {
        self.params
            .iter()
            .chain(self.ret.iter())
            .chain(self.locals.iter())
            .find(|(n, _)| n == name)
            .map(|(_, t)| *t)
    }

    pub fn is_param(&self, name: &str) -> bool {
        self.params.iter().any(|(n, _)| n == name)
    }

    /// Integer literals appearing in the body and the contract.
    pub fn literals(&self) -> BTreeSet<i64> {
        let mut out = BTreeSet::new();
        for f in self.pre.iter().chain(self.post.iter()) {
            f.literals(&mut out);
        }
        self.body.walk(&mut |s| match s {
            Stmt::Assign { rhs, .. } => rhs.literals(&mut out),
            Stmt::Store { index, rhs, .. } => {
                index.literals(&mut out);
                rhs.literals(&mut out);
            }
            Stmt::If { cond, .. } | Stmt::While { cond, .. } => cond.literals(&mut out),
            _ => {}
        });
        out
    }

    pub fn if_count(&self) -> usize {
        let mut n = 0;
        self.body.walk(&mut |s| {
            if matches!(s, Stmt::If { .. }) {
                n += 1
            }
        });
        n
    }

    /// Recompute the loop index from the body (preorder).
    pub fn index_loops(&mut self) {
        let vars: BTreeSet<Ident> = self.all_vars().into_iter().map(|(n, _)| n).collect();
        let mut loops = Vec::new();
        fn go(s: &Stmt, depth: usize, vars: &BTreeSet<Ident>, out: &mut Vec<LoopSite>) {
            match s {
                Stmt::While {
                    id,
                    cond,
                    invariants,
                    body,
                } => {
                    out.push(LoopSite {
                        id: *id,
                        depth,
                        guard: cond.clone(),
                        modified_vars: body.modified_vars(),
                        in_scope_vars: vars.clone(),
                        golden: invariants.clone(),
                    });
                    go(body, depth + 1, vars, out);
                }
                Stmt::If { then, els, .. } => {
                    go(then, depth, vars, out);
                    go(els, depth, vars, out);
                }
                Stmt::Seq(items) => {
                    for i in items {
                        go(i, depth, vars, out);
                    }
                }
                _ => {}
            }
        }
        go(&self.body, 0, &vars, &mut loops);
        loops.sort_by_key(|l| l.id);
        self.loops = loops;
    }
}
