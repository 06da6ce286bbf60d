use std::sync::Arc;

use super::*;
use crate::interp::{Env, Interpreter, Value};
use crate::lang::{parse_formula, parse_program, typecheck};
use crate::prover::SolverConfig;
use crate::testgen::{generate_valid_inputs, TestSuite};

fn load(src: &str) -> TypedProgram {
    typecheck(&parse_program(src).unwrap()).unwrap()
}

fn bsearch() -> TypedProgram {
    load(include_str!("../../../../corpus/binarySearch0.mlw"))
}

fn f(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn k(s: &str) -> String {
    key(&normalize(&f(s)))
}

fn full_pool(p: &TypedProgram) -> ExpressionPool {
    extract_predicates(build_pools(p, &p.loops[0], &p.post), &p.post)
}

fn keys(m: &MutantSet) -> BTreeSet<String> {
    m.mutants.iter().map(|m| m.key.clone()).collect()
}

fn wave(kind: WaveKind, steps: Vec<Step>, restricted: bool) -> Wave {
    Wave {
        id: 99,
        kind,
        steps,
        restricted,
    }
}

#[test]
fn binary_search_pools() {
    let p = bsearch();
    let pool = build_pools(&p, &p.loops[0], &p.post);
    for e in ["low", "high", "mid", "fromIndex", "toIndex", "key", "0", "1", "-1", "a.length"] {
        assert!(pool.int.contains(&f(e)), "{e} missing from {:?}", pool.int);
    }
    assert!(pool.int.contains(&Expr::Old("fromIndex".into())));
    assert!(!pool.int_restricted.contains(&f("a.length")));
    assert_eq!(pool.arrays, vec![f("a")]);
    assert!(pool.bools.is_empty());
    assert_eq!(pool.collections, ["TArrays".to_string()].into_iter().collect());
}

#[test]
fn no_arrays_no_array_pool() {
    let p = load("method m(n: int) ensures n == n; { var i: int; while (i < n) { i := i + 1; } }");
    let pool = full_pool(&p);
    assert!(pool.arrays.is_empty());
    assert!(pool.collections.is_empty());
    // only the top-level atom of the postcondition
    assert_eq!(pool.bools, vec![f("n == n")]);
}

#[test]
fn extraction_covers_the_collection() {
    let p = bsearch();
    let pool = full_pool(&p);
    assert!(pool.bools.contains(&f("!has(a, fromIndex, toIndex, key)")));
    let names: BTreeSet<&str> = pool
        .bools
        .iter()
        .filter_map(|b| match b {
            Expr::Call(n, _) => Some(n.as_str()),
            _ => None,
        })
        .collect();
    assert!(names.contains("within") && names.contains("sorted") && names.contains("has"));
    assert!(pool.bools.iter().all(|b| !b.contains_result()));
}

#[test]
fn figure_ten_chain() {
    let p = bsearch();
    let env = p.env();
    let q = &p.post[1];
    let step1 = apply_substitution(q, &f("low"), env);
    let with_low = step1
        .iter()
        .find(|m| !m.contains_result())
        .expect("the only result occurrence replaced");
    let step2: BTreeSet<String> = apply_substitution(with_low, &f("mid"), env)
        .iter()
        .map(|m| key(&normalize(m)))
        .collect();
    assert!(step2.contains(&k("low < 0 ==> !has(a, fromIndex, mid, key)")));
}

#[test]
fn self_substitution() {
    let p = load("method m(x: int) { skip; }");
    let out: BTreeSet<String> = apply_substitution(&f("x > 0"), &f("x"), p.env())
        .iter()
        .map(key)
        .collect();
    assert_eq!(out, [key(&f("x > 0")), key(&f("x > x"))].into_iter().collect());
}

#[test]
fn aging_examples() {
    let p = bsearch();
    let aged: BTreeSet<String> = apply_aging(&f("!has(a, high, toIndex, key)"), p.env())
        .iter()
        .map(|m| key(&normalize(m)))
        .collect();
    assert!(aged.contains(&k("!has(a, high + 1, toIndex, key)")));
    let q = load("method m(x: int, y: int) { skip; }");
    assert_eq!(apply_aging(&f("x == y"), q.env()).len(), 4);
    assert!(apply_aging(&f("b"), &TypeEnv::default()).is_empty());
}

#[test]
fn weakening_examples() {
    let m = f("sorted(a, 0, i)");
    let out = apply_weakening(&m, &f("i < a.length"));
    assert_eq!(out, vec![f("i < a.length ==> sorted(a, 0, i)"), f("!(i < a.length) ==> sorted(a, 0, i)")]);
    let t = apply_weakening(&m, &Expr::Bool(true));
    assert_eq!(key(&normalize(&t[0])), key(&normalize(&m)));
}

#[test]
fn identity_wave_returns_the_seeds() {
    let p = load(
        "method m(n: int) returns (r: int) ensures \\result == n; ensures n >= 0; ensures n <= 9; \
         { var i: int; while (i < n) { i := i + 1; } r := n; }",
    );
    let pool = full_pool(&p);
    let mut memo = HashSet::new();
    let out = run_wave(&wave(WaveKind::Clause, vec![], false), &p.post, &pool, p.env(), &mut memo, DEFAULT_MUTANT_CAP);
    assert_eq!(keys(&out), [k("n >= 0"), k("n <= 9")].into_iter().collect());
    assert_eq!(out.raw, 0);
}

#[test]
fn clause_wave_reaches_figure_ten() {
    let p = bsearch();
    let pool = full_pool(&p);
    let mut memo = HashSet::new();
    let w = wave(WaveKind::Clause, vec![Step::Substitute(2)], true);
    let out = run_wave(&w, &p.post, &pool, p.env(), &mut memo, DEFAULT_MUTANT_CAP);
    let target = k("low < 0 ==> !has(a, fromIndex, mid, key)");
    assert!(keys(&out).contains(&target));
    assert!(out.mutants.iter().all(|m| !m.formula.contains_result()));
    let chain = out.derivation(&target);
    assert_eq!(chain.len(), 3, "{chain:?}");
    // a second run against the same memo yields nothing new
    let again = run_wave(&w, &p.post, &pool, p.env(), &mut memo, DEFAULT_MUTANT_CAP);
    assert!(again.mutants.is_empty());
}

#[test]
fn collection_wave_contains_both_golden_has_invariants() {
    let p = bsearch();
    let pool = full_pool(&p);
    let mut memo = HashSet::new();
    let w = wave(WaveKind::Collection, vec![Step::Substitute(1), Step::Aging], false);
    let out = keys(&run_wave(&w, &p.post, &pool, p.env(), &mut memo, DEFAULT_MUTANT_CAP));
    assert!(out.contains(&k("!has(a, fromIndex, low, key)")));
    assert!(out.contains(&k("!has(a, high + 1, toIndex, key)")));
}

#[test]
fn cap_cuts_a_wave_short() {
    let p = bsearch();
    let pool = full_pool(&p);
    let mut memo = HashSet::new();
    let w = wave(WaveKind::Clause, vec![Step::Substitute(3)], false);
    let out = run_wave(&w, &p.post, &pool, p.env(), &mut memo, 100);
    assert!(out.budget_exceeded);
    assert_eq!(out.raw, 101);
}

#[test]
fn default_schedule_shape() {
    let s = WaveSchedule::default();
    assert_eq!(s.waves.len(), 16);
    let count = |kind| s.waves.iter().filter(|w| w.kind == kind).count();
    assert_eq!(
        (count(WaveKind::Clause), count(WaveKind::Predicate), count(WaveKind::Collection)),
        (7, 4, 5)
    );
    assert!(WaveSchedule::parse(r#"{"waves":[{"id":1,"kind":"clause","steps":[{"substitute":4}],"restricted":false}]}"#).is_err());
}

fn suite_with(p: &TypedProgram, inputs: Vec<Env>) -> TestSuite {
    let interp = Interpreter::new(p);
    let mut suite = TestSuite::new(0);
    for e in inputs {
        let state = interp.layout().initial_state(&e);
        let t = interp.run_state(state.clone(), 10_000);
        assert!(suite.push(state, Arc::new(t)));
    }
    suite
}

fn set_of(wave: usize, fs: &[&str]) -> MutantSet {
    MutantSet {
        wave,
        mutants: fs
            .iter()
            .map(|s| {
                let g = normalize(&f(s));
                Mutant {
                    key: key(&g),
                    formula: g,
                    parent: None,
                    op: "seed".into(),
                }
            })
            .collect(),
        raw: 0,
        budget_exceeded: false,
        lineage: HashMap::new(),
    }
}

#[test]
fn dynamic_validation() {
    let p = bsearch();
    let found = Env::new()
        .with("a", Value::Array(vec![0, 1, 2]))
        .with("fromIndex", Value::Int(0))
        .with("toIndex", Value::Int(3))
        .with("key", Value::Int(2));
    let obs = Observations::new(&p, &suite_with(&p, vec![found]));
    let site = &p.loops[0];
    let ms = set_of(
        1,
        &[
            "low < 0 ==> !has(a, fromIndex, mid, key)",
            "!has(a, high, toIndex, key)",
            "!has(a, high + 1, toIndex, key)",
        ],
    );
    let kept: Vec<String> = dynamic_validate(&ms, &obs, site, 2, Strategy::Sequential)
        .into_iter()
        .map(|c| c.key)
        .collect();
    let mut want = vec![k("low < 0 ==> !has(a, fromIndex, mid, key)"), k("!has(a, high + 1, toIndex, key)")];
    want.sort();
    assert_eq!(kept, want);
    assert!(dynamic_validate(&set_of(1, &[]), &obs, site, 4, Strategy::Parallel).is_empty());
}

#[test]
fn validation_does_not_depend_on_batching() {
    let p = bsearch();
    let suite = generate_valid_inputs(&p, 200, 3).unwrap();
    let obs = Observations::new(&p, &suite);
    let pool = full_pool(&p);
    let mut memo = HashSet::new();
    let w = wave(WaveKind::Collection, vec![Step::Substitute(1)], true);
    let ms = run_wave(&w, &p.post, &pool, p.env(), &mut memo, DEFAULT_MUTANT_CAP);
    let one = dynamic_validate(&ms, &obs, &p.loops[0], 1, Strategy::Sequential);
    let all = dynamic_validate(&ms, &obs, &p.loops[0], ms.mutants.len(), Strategy::Parallel);
    assert_eq!(one, all);
    assert!(one.iter().any(|c| c.key == k("!has(a, fromIndex, low, key)")));
}

#[test]
fn tautology_elimination() {
    let p = bsearch();
    let prover = Prover::new(SolverConfig::default());
    let cand = |s: &str| Candidate::new(0, f(s), Origin::Mutation { wave: 1 });
    let verified: Vec<Candidate> = ["fromIndex <= low", "0 <= fromIndex", "low <= high + 1", "high < toIndex"]
        .iter()
        .map(|s| cand(s).with_status(Status::Proved))
        .collect();
    let r = eliminate_tautologies(
        vec![
            cand("low <= low"),
            cand("low < 0 ==> !has(a, fromIndex, mid, key)"),
            cand("!has(a, fromIndex, low, key)"),
        ],
        &verified,
        &prover,
        p.env(),
        Strategy::Parallel,
    );
    let removed: BTreeSet<String> = r.removed.iter().map(|c| c.key.clone()).collect();
    assert_eq!(
        removed,
        [k("low <= low"), k("low < 0 ==> !has(a, fromIndex, mid, key)")].into_iter().collect()
    );
    assert_eq!(r.kept.len(), 1);
    // each removal is re-provable by a separate solver invocation
    let assumptions: Vec<Formula> = verified.iter().map(|c| c.formula.clone()).collect();
    let again = Prover::new(SolverConfig::default());
    for c in &r.removed {
        let v = again.implied(&p.env().vars, &assumptions, &[c.formula.clone()]).unwrap();
        assert!(v[0].is_valid());
    }
}
