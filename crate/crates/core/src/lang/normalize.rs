//! Syntactic normal form used as a dedup key for candidates.
//!
//! `&&`, `||` and `==>` are left in place: with short-circuit definedness
//! they are not commutative.

use super::ast::*;

pub fn normalize(f: &Formula) -> Formula {
    let mut out = f.clone();
    for c in out.children_mut() {
        *c = normalize(c);
    }
    rewrite(out)
}

/// Printed normal form.
pub fn key(f: &Formula) -> String {
    normalize(f).to_string()
}

fn rewrite(e: Expr) -> Expr {
    match e {
        Expr::Binary(BinOp::Gt, l, r) => rewrite(Expr::Binary(BinOp::Lt, r, l)),
        Expr::Binary(BinOp::Ge, l, r) => rewrite(Expr::Binary(BinOp::Le, r, l)),
        Expr::Binary(BinOp::Implies, l, r) if *l == Expr::Bool(true) => *r,
        Expr::Unary(UnOp::Not, inner) => match *inner {
            Expr::Unary(UnOp::Not, x) => *x,
            other => Expr::Unary(UnOp::Not, Box::new(other)),
        },
        Expr::Binary(BinOp::Add | BinOp::Sub, _, _) => fold_offset(e),
        Expr::Binary(op @ (BinOp::Mul | BinOp::Eq | BinOp::Ne), l, r) => {
            if l.to_string() <= r.to_string() {
                Expr::Binary(op, l, r)
            } else {
                Expr::Binary(op, r, l)
            }
        }
        other => other,
    }
}

/// Split `e` into a non-constant base and an integer offset.
fn split_offset(e: &Expr) -> (Option<Expr>, i64) {
    match e {
        Expr::Int(n) => (None, *n),
        Expr::Binary(BinOp::Add, l, r) => {
            let (lb, lk) = split_offset(l);
            let (rb, rk) = split_offset(r);
            match (lb, rb, lk.checked_add(rk)) {
                (Some(b), None, Some(k)) | (None, Some(b), Some(k)) => (Some(b), k),
                (None, None, Some(k)) => (None, k),
                _ => (Some(e.clone()), 0),
            }
        }
        Expr::Binary(BinOp::Sub, l, r) => {
            let (lb, lk) = split_offset(l);
            let (rb, rk) = split_offset(r);
            match (lb, rb, lk.checked_sub(rk)) {
                (Some(b), None, Some(k)) => (Some(b), k),
                (None, None, Some(k)) => (None, k),
                _ => (Some(e.clone()), 0),
            }
        }
        _ => (Some(e.clone()), 0),
    }
}

fn fold_offset(e: Expr) -> Expr {
    let (base, k) = split_offset(&e);
    let rebuilt = match base {
        None => Expr::Int(k),
        Some(b) if b == e => return sort_add(e),
        Some(b) if k == 0 => b,
        Some(b) if k > 0 => Expr::bin(BinOp::Add, b, Expr::Int(k)),
        Some(b) => match k.checked_neg() {
            Some(m) => Expr::bin(BinOp::Sub, b, Expr::Int(m)),
            None => Expr::bin(BinOp::Add, b, Expr::Int(k)),
        },
    };
    sort_add(rebuilt)
}

fn sort_add(e: Expr) -> Expr {
    match e {
        // keep `base + k` with the constant on the right
        Expr::Binary(BinOp::Add, l, r)
            if !matches!(*r, Expr::Int(_)) && (matches!(*l, Expr::Int(_)) || l.to_string() > r.to_string()) =>
        {
            Expr::Binary(BinOp::Add, r, l)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_formula;

    fn k(s: &str) -> String {
        key(&parse_formula(s).unwrap())
    }

    #[test]
    fn strict_orderings_flip() {
        assert_eq!(k("x > y"), k("y < x"));
        assert_eq!(k("x >= y"), "y <= x");
    }

    #[test]
    fn commutative_operands_sort() {
        assert_eq!(k("y == x"), "x == y");
        assert_eq!(k("b * a"), "a * b");
        assert_eq!(k("1 + x"), "x + 1");
    }

    #[test]
    fn offsets_fold() {
        assert_eq!(k("x + 1 - 1"), "x");
        assert_eq!(k("x - 1 + 2"), "x + 1");
        assert_eq!(k("x + -1"), "x - 1");
        assert_eq!(k("low <= high + 1 - 1"), "low <= high");
        assert_eq!(k("2 + 3"), "5");
    }

    #[test]
    fn trivial_antecedent_and_double_negation() {
        assert_eq!(k("true ==> x < y"), "x < y");
        assert_eq!(k("!!p"), "p");
    }

    #[test]
    fn conjunction_order_is_kept() {
        assert_eq!(k("b && a"), "b && a");
    }

    #[test]
    fn idempotent() {
        for s in ["x - 1 + y", "!(x > 1 + y)", "(forall k in 0 .. n + 0 :: a[k] >= 0)"] {
            let once = normalize(&parse_formula(s).unwrap());
            assert_eq!(normalize(&once), once, "{s}");
        }
    }
}
