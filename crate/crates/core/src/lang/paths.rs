//! Tree paths into formulas, used by the mutation operators.

use super::ast::*;
use super::typecheck::TypeEnv;

/// Child indices from the root, as in [`Expr::children`].
pub type Path = Vec<usize>;

/// Every occurrence of a subexpression of type `t`, in preorder.
pub fn subexpressions(f: &Formula, t: Type, env: &TypeEnv) -> Vec<(Path, Expr)> {
    let mut out = Vec::new();
    walk(f, t, env, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

fn walk(
    e: &Expr,
    t: Type,
    env: &TypeEnv,
    path: &mut Path,
    bound: &mut Vec<Ident>,
    out: &mut Vec<(Path, Expr)>,
) {
    if env.infer(e, bound) == Some(t) {
        out.push((path.clone(), e.clone()));
    }
    let binder = match e {
        Expr::Quant { var, .. } => Some(var.clone()),
        _ => None,
    };
    for (k, c) in e.children().into_iter().enumerate() {
        path.push(k);
        // only the body (index 2) sees the bound variable
        let scoped = binder.is_some() && k == 2;
        if scoped {
            bound.push(binder.clone().unwrap());
        }
        walk(c, t, env, path, bound, out);
        if scoped {
            bound.pop();
        }
        path.pop();
    }
}

pub fn get<'a>(e: &'a Expr, path: &[usize]) -> Option<&'a Expr> {
    match path.split_first() {
        None => Some(e),
        Some((k, rest)) => get(e.children().get(*k).copied()?, rest),
    }
}

/// Copy of `e` with the node at `path` replaced.
pub fn replace_at(e: &Expr, path: &[usize], with: Expr) -> Expr {
    let mut out = e.clone();
    let mut cur = &mut out;
    for k in path {
        cur = cur.children_mut().into_iter().nth(*k).expect("valid path");
    }
    *cur = with;
    out
}
