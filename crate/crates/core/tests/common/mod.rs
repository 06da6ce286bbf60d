#![allow(dead_code)]

use std::path::PathBuf;

use forge::lang::{parse_program, typecheck, BinOp, Expr, Formula, Quantifier, Type, TypeEnv, TypedProgram, UnOp};
use proptest::prelude::*;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// The ten corpus programs, by file name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(corpus_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "mlw") {
            let name = p.file_stem().unwrap().to_string_lossy().to_string();
            out.push((name, std::fs::read_to_string(&p).unwrap()));
        }
    }
    out.sort();
    out
}

pub fn load(src: &str) -> TypedProgram {
    typecheck(&parse_program(src).unwrap()).unwrap()
}

pub fn corpus_program(name: &str) -> TypedProgram {
    let src = std::fs::read_to_string(corpus_dir().join(format!("{name}.mlw"))).unwrap();
    load(&src)
}

pub fn solver_available() -> bool {
    forge::prover::Prover::new(forge::prover::SolverConfig::default()).available()
}

/// Scalars x, y, z, array a, no result.
pub fn formula_env() -> TypeEnv {
    let mut env = TypeEnv::default();
    for v in ["x", "y", "z"] {
        env.vars.insert(v.into(), Type::Int);
    }
    env.vars.insert("a".into(), Type::IntArray);
    env
}

fn bin(op: BinOp, l: (Expr, usize), r: (Expr, usize), own: usize) -> (Expr, usize) {
    (Expr::bin(op, l.0, r.0), l.1 + r.1 + own)
}

/// Int expressions over [`formula_env`], paired with their number of
/// Int-typed nodes counted while building them. `bound` names quantified
/// variables in scope.
pub fn int_expr(depth: u32, bound: Vec<String>) -> BoxedStrategy<(Expr, usize)> {
    let mut names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    names.extend(bound.iter().cloned());
    let leaf = prop_oneof![
        proptest::sample::select(names).prop_map(|v| (Expr::var(v), 1)),
        (0i64..10).prop_map(|n| (Expr::Int(n), 1)),
        proptest::sample::select(vec!["x", "y", "z"]).prop_map(|v| (Expr::Old(v.into()), 1)),
        Just((Expr::Length(Box::new(Expr::var("a"))), 1)),
    ]
    .boxed();
    if depth == 0 {
        return leaf;
    }
    let sub = || int_expr(depth - 1, bound.clone());
    prop_oneof![
        3 => leaf,
        1 => (sub(), sub(), proptest::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]))
            .prop_map(|(l, r, op)| bin(op, l, r, 1)),
        1 => sub().prop_map(|i| (Expr::Index(Box::new(Expr::var("a")), Box::new(i.0)), i.1 + 1)),
        1 => sub().prop_map(|i| (Expr::Unary(UnOp::Neg, Box::new(i.0)), i.1 + 1)),
    ]
    .boxed()
}

/// Bool formulas with their Int-node count, as for [`int_expr`].
pub fn bool_expr(depth: u32, bound: Vec<String>) -> BoxedStrategy<(Formula, usize)> {
    let i = |d: u32| int_expr(d, bound.clone());
    let leaf = prop_oneof![
        any::<bool>().prop_map(|b| (Expr::Bool(b), 0)),
        (i(1), i(1), proptest::sample::select(vec![BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge]))
            .prop_map(|(l, r, op)| bin(op, l, r, 0)),
        (i(0), i(0), i(0)).prop_map(|(lo, hi, k)| (
            Expr::Call("has".into(), vec![Expr::var("a"), lo.0, hi.0, k.0]),
            lo.1 + hi.1 + k.1
        )),
    ]
    .boxed();
    if depth == 0 {
        return leaf;
    }
    let sub = || bool_expr(depth - 1, bound.clone());
    let var = format!("k{}", bound.len());
    let mut inner = bound.clone();
    inner.push(var.clone());
    prop_oneof![
        3 => leaf,
        1 => sub().prop_map(|b| (Expr::not(b.0), b.1)),
        2 => (sub(), sub(), proptest::sample::select(vec![BinOp::And, BinOp::Or, BinOp::Implies]))
            .prop_map(|(l, r, op)| bin(op, l, r, 0)),
        1 => (i(0), i(0), bool_expr(depth - 1, inner), any::<bool>()).prop_map(move |(lo, hi, body, all)| (
            Expr::Quant {
                q: if all { Quantifier::Forall } else { Quantifier::Exists },
                var: var.clone(),
                lo: Box::new(lo.0),
                hi: Box::new(hi.0),
                body: Box::new(body.0),
            },
            lo.1 + hi.1 + body.1
        )),
    ]
    .boxed()
}
