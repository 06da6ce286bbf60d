//! Built-in specification predicates.
//!
//! Each predicate has an executable body used by the interpreter and a
//! quantified logical body that the prover inlines.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::ast::*;
use super::parser::parse_formula;
use super::subst::substitute;

/// Runtime argument passed to an executable predicate body.
#[derive(Clone, Copy, Debug)]
pub enum PredArg<'a> {
    Int(i64),
    Array(Option<&'a [i64]>),
}

impl PredArg<'_> {
    fn int(&self) -> i64 {
        match self {
            PredArg::Int(n) => *n,
            PredArg::Array(_) => panic!("predicate argument: expected int"),
        }
    }

    fn array(&self) -> Option<&[i64]> {
        match self {
            PredArg::Array(a) => *a,
            PredArg::Int(_) => panic!("predicate argument: expected array"),
        }
    }
}

/// `None` means the domain precondition failed.
pub type ExecFn = fn(&[PredArg<'_>]) -> Option<bool>;

pub struct PredicateDef {
    pub name: &'static str,
    pub collection: &'static str,
    pub params: Vec<(Ident, Type)>,
    pub domain_pre: Formula,
    pub logic_body: Formula,
    pub exec: ExecFn,
}

impl PredicateDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    fn bind(&self, args: &[Expr]) -> BTreeMap<Ident, Expr> {
        self.params
            .iter()
            .map(|(n, _)| n.clone())
            .zip(args.iter().cloned())
            .collect()
    }

    /// Domain precondition with the actual arguments substituted.
    pub fn domain_at(&self, args: &[Expr]) -> Formula {
        substitute(&self.domain_pre, &self.bind(args))
    }

    /// Logical body with the actual arguments substituted (capture-avoiding).
    pub fn body_at(&self, args: &[Expr]) -> Formula {
        substitute(&self.logic_body, &self.bind(args))
    }
}

pub const TARRAYS: &str = "TArrays";

fn range_ok(a: Option<&[i64]>, lo: i64, hi: i64) -> Option<&[i64]> {
    let a = a?;
    (0 <= lo && lo <= hi && hi <= a.len() as i64).then_some(a)
}

fn exec_within(args: &[PredArg<'_>]) -> Option<bool> {
    let (lo, hi) = (args[1].int(), args[2].int());
    Some(range_ok(args[0].array(), lo, hi).is_some())
}

fn exec_sorted(args: &[PredArg<'_>]) -> Option<bool> {
    let (lo, hi) = (args[1].int(), args[2].int());
    let a = range_ok(args[0].array(), lo, hi)?;
    let s = &a[lo as usize..hi as usize];
    Some(s.windows(2).all(|w| w[0] <= w[1]))
}

fn exec_has(args: &[PredArg<'_>]) -> Option<bool> {
    let (lo, hi, key) = (args[1].int(), args[2].int(), args[3].int());
    let a = range_ok(args[0].array(), lo, hi)?;
    Some(a[lo as usize..hi as usize].contains(&key))
}

const WITHIN_BODY: &str = "a != null && 0 <= lo && lo <= hi && hi <= a.length";

fn build() -> Vec<PredicateDef> {
    let f = |s: &str| parse_formula(s).expect("library formula");
    let arr = |n: &str| (n.to_string(), Type::IntArray);
    let int = |n: &str| (n.to_string(), Type::Int);
    vec![
        PredicateDef {
            name: "within",
            collection: TARRAYS,
            params: vec![arr("a"), int("lo"), int("hi")],
            domain_pre: Expr::Bool(true),
            logic_body: f(WITHIN_BODY),
            exec: exec_within,
        },
        // Pairwise rather than adjacent: equivalent, but the pairwise form
        // gives the solver transitivity without induction.
        PredicateDef {
            name: "sorted",
            collection: TARRAYS,
            params: vec![arr("a"), int("lo"), int("hi")],
            domain_pre: f(WITHIN_BODY),
            logic_body: f("forall i in lo .. hi :: forall j in i .. hi :: a[i] <= a[j]"),
            exec: exec_sorted,
        },
        PredicateDef {
            name: "has",
            collection: TARRAYS,
            params: vec![arr("a"), int("lo"), int("hi"), int("key")],
            domain_pre: f(WITHIN_BODY),
            logic_body: f("exists i in lo .. hi :: a[i] == key"),
            exec: exec_has,
        },
    ]
}

pub fn library() -> &'static [PredicateDef] {
    static LIB: OnceLock<Vec<PredicateDef>> = OnceLock::new();
    LIB.get_or_init(build)
}

pub fn lookup(name: &str) -> Option<&'static PredicateDef> {
    library().iter().find(|p| p.name == name)
}

/// Library predicates belonging to `collection`, in library order.
pub fn collection(collection: &str) -> Vec<&'static PredicateDef> {
    library()
        .iter()
        .filter(|p| p.collection == collection)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(v: &[i64]) -> PredArg<'_> {
        PredArg::Array(Some(v))
    }

    #[test]
    fn exec_examples() {
        let a = [1, 5, 9];
        assert_eq!(exec_has(&[arr(&a), PredArg::Int(0), PredArg::Int(3), PredArg::Int(5)]), Some(true));
        let b = [3, 1];
        assert_eq!(exec_sorted(&[arr(&b), PredArg::Int(0), PredArg::Int(2)]), Some(false));
        assert_eq!(
            exec_within(&[PredArg::Array(None), PredArg::Int(0), PredArg::Int(0)]),
            Some(false)
        );
    }

    #[test]
    fn domain_failures_are_reported() {
        let a = [1, 2];
        assert_eq!(exec_sorted(&[arr(&a), PredArg::Int(1), PredArg::Int(3)]), None);
        assert_eq!(exec_has(&[arr(&a), PredArg::Int(2), PredArg::Int(1), PredArg::Int(0)]), None);
        assert_eq!(exec_has(&[PredArg::Array(None), PredArg::Int(0), PredArg::Int(0), PredArg::Int(0)]), None);
    }

    #[test]
    fn instantiation_avoids_capture() {
        let sorted = lookup("sorted").unwrap();
        let body = sorted.body_at(&[Expr::var("a"), Expr::Int(0), Expr::var("i")]);
        // the argument `i` must stay free
        assert!(body.free_vars().contains("i"));
    }

    #[test]
    fn one_collection() {
        assert_eq!(collection(TARRAYS).len(), 3);
        assert!(lookup("frob").is_none());
    }
}
