use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::ast::*;
use super::predicates;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{context}: {msg}")]
pub struct TypeError {
    /// Where the offending node sits, e.g. `requires #1` or `loop 0 guard`.
    pub context: String,
    pub msg: String,
}

/// Typing context for a formula: program variables, the result type and the
/// quantifier variables currently in scope (always Int).
#[derive(Clone, Debug, Default)]
pub struct TypeEnv {
    pub vars: BTreeMap<Ident, Type>,
    pub result: Option<Type>,
}

impl TypeEnv {
    pub fn of_program(p: &Program) -> TypeEnv {
        TypeEnv {
            vars: p.all_vars().into_iter().collect(),
            result: p.ret.as_ref().map(|(_, t)| *t),
        }
    }

    /// Type of a well-typed expression; `None` if it is not well typed.
    pub fn type_of(&self, e: &Expr) -> Option<Type> {
        self.infer(e, &mut Vec::new())
    }

    pub(crate) fn infer(&self, e: &Expr, bound: &mut Vec<Ident>) -> Option<Type> {
        let mut errs = Vec::new();
        let t = self.check(e, bound, &mut errs, true);
        if errs.is_empty() {
            t
        } else {
            None
        }
    }

    /// Infer the type of `e`, pushing messages for every ill-typed node.
    /// Returns `None` when no type could be assigned.
    fn check(
        &self,
        e: &Expr,
        bound: &mut Vec<Ident>,
        errs: &mut Vec<String>,
        spec: bool,
    ) -> Option<Type> {
        let expect = |this: &Self, sub: &Expr, want: Type, bound: &mut Vec<Ident>, errs: &mut Vec<String>| {
            if let Some(t) = this.check(sub, bound, errs, spec) {
                if t != want {
                    errs.push(format!("`{sub}` has type {t}, expected {want}"));
                }
            }
        };
        match e {
            Expr::Int(_) => Some(Type::Int),
            Expr::Bool(_) => Some(Type::Bool),
            Expr::Null => Some(Type::IntArray),
            Expr::Var(v) => {
                if bound.contains(v) {
                    Some(Type::Int)
                } else if let Some(t) = self.vars.get(v) {
                    Some(*t)
                } else {
                    errs.push(format!("unknown variable `{v}`"));
                    None
                }
            }
            Expr::Old(v) => {
                if !spec {
                    errs.push("`\\old` is not allowed in statements".into());
                }
                match self.vars.get(v) {
                    Some(t) => Some(*t),
                    None => {
                        errs.push(format!("unknown variable `{v}`"));
                        None
                    }
                }
            }
            Expr::Result => {
                if !spec {
                    errs.push("`\\result` is not allowed in statements".into());
                }
                if self.result.is_none() {
                    errs.push("`\\result` used in a method without a result".into());
                }
                self.result
            }
            Expr::Unary(UnOp::Neg, x) => {
                expect(self, x, Type::Int, bound, errs);
                Some(Type::Int)
            }
            Expr::Unary(UnOp::Not, x) => {
                expect(self, x, Type::Bool, bound, errs);
                Some(Type::Bool)
            }
            Expr::Binary(op, l, r) => {
                if op.is_arithmetic() || op.is_ordering() {
                    expect(self, l, Type::Int, bound, errs);
                    expect(self, r, Type::Int, bound, errs);
                    Some(if op.is_arithmetic() { Type::Int } else { Type::Bool })
                } else if op.is_logical() {
                    if *op == BinOp::Implies && !spec {
                        errs.push("`==>` is not allowed in statements".into());
                    }
                    expect(self, l, Type::Bool, bound, errs);
                    expect(self, r, Type::Bool, bound, errs);
                    Some(Type::Bool)
                } else {
                    let lt = self.check(l, bound, errs, spec);
                    let rt = self.check(r, bound, errs, spec);
                    if let (Some(lt), Some(rt)) = (lt, rt) {
                        if lt != rt {
                            errs.push(format!("cannot compare {lt} with {rt} in `{e}`"));
                        } else if lt == Type::IntArray
                            && !matches!(**l, Expr::Null)
                            && !matches!(**r, Expr::Null)
                        {
                            errs.push(format!("arrays may only be compared with null in `{e}`"));
                        }
                    }
                    Some(Type::Bool)
                }
            }
            Expr::Index(a, i) => {
                expect(self, a, Type::IntArray, bound, errs);
                expect(self, i, Type::Int, bound, errs);
                Some(Type::Int)
            }
            Expr::Length(a) => {
                expect(self, a, Type::IntArray, bound, errs);
                Some(Type::Int)
            }
            Expr::Quant {
                var, lo, hi, body, ..
            } => {
                if !spec {
                    errs.push("quantifiers are not allowed in statements".into());
                }
                if self.vars.contains_key(var) || bound.contains(var) {
                    errs.push(format!("quantifier variable `{var}` shadows another variable"));
                }
                expect(self, lo, Type::Int, bound, errs);
                expect(self, hi, Type::Int, bound, errs);
                bound.push(var.clone());
                expect(self, body, Type::Bool, bound, errs);
                bound.pop();
                Some(Type::Bool)
            }
            Expr::Call(name, args) => {
                if !spec {
                    errs.push(format!("predicate `{name}` called in a statement"));
                }
                let Some(def) = predicates::lookup(name) else {
                    errs.push(format!("unknown predicate `{name}`"));
                    return Some(Type::Bool);
                };
                if def.arity() != args.len() {
                    errs.push(format!(
                        "`{name}` expects {} arguments, got {}",
                        def.arity(),
                        args.len()
                    ));
                }
                for (arg, (_, want)) in args.iter().zip(def.params.iter()) {
                    expect(self, arg, *want, bound, errs);
                }
                Some(Type::Bool)
            }
        }
    }

    /// Check that `f` is a Bool formula, collecting all errors.
    pub fn check_formula(&self, f: &Formula) -> Vec<String> {
        let mut errs = Vec::new();
        if let Some(t) = self.check(f, &mut Vec::new(), &mut errs, true) {
            if t != Type::Bool {
                errs.push(format!("`{f}` has type {t}, expected bool"));
            }
        }
        errs
    }
}

/// A program that passed [`typecheck`]. Cheap to clone and share.
#[derive(Clone, Debug)]
pub struct TypedProgram {
    inner: Arc<Program>,
    env: Arc<TypeEnv>,
}

impl TypedProgram {
    pub fn program(&self) -> &Program {
        &self.inner
    }

    pub fn env(&self) -> &TypeEnv {
        &self.env
    }

    pub fn type_of(&self, e: &Expr) -> Option<Type> {
        self.env.type_of(e)
    }
}

impl std::ops::Deref for TypedProgram {
    type Target = Program;
    fn deref(&self) -> &Program {
        &self.inner
    }
}

struct Checker<'a> {
    env: TypeEnv,
    errors: &'a mut Vec<TypeError>,
}

impl Checker<'_> {
    fn push(&mut self, context: &str, msgs: Vec<String>) {
        for msg in msgs {
            self.errors.push(TypeError {
                context: context.to_string(),
                msg,
            });
        }
    }

    fn stmt_expr(&mut self, context: &str, e: &Expr, want: Type) {
        let mut errs = Vec::new();
        if let Some(t) = self.env.check(e, &mut Vec::new(), &mut errs, false) {
            if t != want {
                errs.push(format!("`{e}` has type {t}, expected {want}"));
            }
        }
        self.push(context, errs);
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Skip => {}
            Stmt::Assign { target, rhs } => {
                let ctx = format!("assignment to `{target}`");
                match self.env.vars.get(target).copied() {
                    Some(Type::IntArray) => {
                        self.push(&ctx, vec!["array variables cannot be reassigned".into()])
                    }
                    Some(t) => self.stmt_expr(&ctx, rhs, t),
                    None => self.push(&ctx, vec![format!("unknown variable `{target}`")]),
                }
            }
            Stmt::Store { array, index, rhs } => {
                let ctx = format!("store into `{array}`");
                if self.env.vars.get(array) != Some(&Type::IntArray) {
                    self.push(&ctx, vec![format!("`{array}` is not an int[] variable")]);
                }
                self.stmt_expr(&ctx, index, Type::Int);
                self.stmt_expr(&ctx, rhs, Type::Int);
            }
            Stmt::If {
                id,
                cond,
                then,
                els,
            } => {
                self.stmt_expr(&format!("if #{id} condition"), cond, Type::Bool);
                self.stmt(then);
                self.stmt(els);
            }
            Stmt::While {
                id,
                cond,
                invariants,
                body,
            } => {
                self.stmt_expr(&format!("loop {id} guard"), cond, Type::Bool);
                for (k, inv) in invariants.iter().enumerate() {
                    let errs = self.env.check_formula(inv);
                    self.push(&format!("loop {id} invariant #{}", k + 1), errs);
                    if inv.contains_result() {
                        self.push(
                            &format!("loop {id} invariant #{}", k + 1),
                            vec!["`\\result` is not allowed in loop invariants".into()],
                        );
                    }
                }
                self.stmt(body);
            }
            Stmt::Seq(items) => {
                for i in items {
                    self.stmt(i);
                }
            }
        }
    }
}

/// Typecheck a parsed program, collecting every error.
pub fn typecheck(program: &Program) -> Result<TypedProgram, Vec<TypeError>> {
    let mut errors = Vec::new();
    let env = TypeEnv::of_program(program);
    {
        let mut c = Checker {
            env: env.clone(),
            errors: &mut errors,
        };
        for (k, f) in program.pre.iter().enumerate() {
            let ctx = format!("requires #{}", k + 1);
            let errs = c.env.check_formula(f);
            c.push(&ctx, errs);
            if f.contains_old() || f.contains_result() {
                c.push(
                    &ctx,
                    vec!["preconditions may not mention `\\old` or `\\result`".into()],
                );
            }
        }
        for (k, f) in program.post.iter().enumerate() {
            let errs = c.env.check_formula(f);
            c.push(&format!("ensures #{}", k + 1), errs);
        }
        c.stmt(&program.body);
    }
    if errors.is_empty() {
        Ok(TypedProgram {
            inner: Arc::new(program.clone()),
            env: Arc::new(env),
        })
    } else {
        Err(errors)
    }
}
