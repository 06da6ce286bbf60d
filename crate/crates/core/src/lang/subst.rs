use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;

/// Capture-avoiding simultaneous substitution of free variables.
pub fn substitute(e: &Expr, map: &BTreeMap<Ident, Expr>) -> Expr {
    if map.is_empty() {
        return e.clone();
    }
    let mut avoid = BTreeSet::new();
    for r in map.values() {
        avoid.extend(r.free_vars());
    }
    go(e, map, &avoid)
}

fn go(e: &Expr, map: &BTreeMap<Ident, Expr>, avoid: &BTreeSet<Ident>) -> Expr {
    match e {
        Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| e.clone()),
        Expr::Quant {
            q,
            var,
            lo,
            hi,
            body,
        } => {
            let lo = go(lo, map, avoid);
            let hi = go(hi, map, avoid);
            let mut inner = map.clone();
            inner.remove(var);
            let (var, body) = if avoid.contains(var) {
                let mut taken = avoid.clone();
                taken.extend(body.free_vars());
                let fresh = fresh_name(var, &taken);
                let renamed = rename_bound(body, var, &fresh);
                (fresh, renamed)
            } else {
                (var.clone(), (**body).clone())
            };
            Expr::Quant {
                q: *q,
                var,
                lo: Box::new(lo),
                hi: Box::new(hi),
                body: Box::new(go(&body, &inner, avoid)),
            }
        }
        _ => {
            let mut out = e.clone();
            let kids: Vec<Expr> = e.children().into_iter().map(|c| go(c, map, avoid)).collect();
            for (slot, k) in out.children_mut().into_iter().zip(kids) {
                *slot = k;
            }
            out
        }
    }
}

fn rename_bound(body: &Expr, from: &str, to: &str) -> Expr {
    let mut m = BTreeMap::new();
    m.insert(from.to_string(), Expr::Var(to.to_string()));
    substitute(body, &m)
}

/// `base`, `base1`, `base2`, ... whichever is first not in `taken`.
pub fn fresh_name(base: &str, taken: &BTreeSet<Ident>) -> Ident {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|n| format!("{base}{n}"))
        .find(|c| !taken.contains(c))
        .unwrap()
}

/// Rename every quantifier-bound variable that collides with `taken`.
pub fn rename_bound_apart(e: &Expr, taken: &BTreeSet<Ident>) -> Expr {
    match e {
        Expr::Quant {
            q,
            var,
            lo,
            hi,
            body,
        } => {
            let lo = rename_bound_apart(lo, taken);
            let hi = rename_bound_apart(hi, taken);
            let body = rename_bound_apart(body, taken);
            let (var, body) = if taken.contains(var) {
                let mut t = taken.clone();
                t.extend(body.free_vars());
                let fresh = fresh_name(var, &t);
                let b = rename_bound(&body, var, &fresh);
                (fresh, b)
            } else {
                (var.clone(), body)
            };
            Expr::Quant {
                q: *q,
                var,
                lo: Box::new(lo),
                hi: Box::new(hi),
                body: Box::new(body),
            }
        }
        _ => {
            let mut out = e.clone();
            let kids: Vec<Expr> = e
                .children()
                .into_iter()
                .map(|c| rename_bound_apart(c, taken))
                .collect();
            for (slot, k) in out.children_mut().into_iter().zip(kids) {
                *slot = k;
            }
            out
        }
    }
}
