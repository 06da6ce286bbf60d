use super::*;
use crate::candidate::Origin;
use crate::lang::{parse_formula, parse_program, typecheck};

fn load(src: &str) -> TypedProgram {
    typecheck(&parse_program(src).unwrap()).unwrap()
}

fn bsearch() -> TypedProgram {
    load(include_str!("../../../../corpus/binarySearch0.mlw"))
}

fn prover() -> Prover {
    Prover::new(SolverConfig::default())
}

fn f(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn golden(p: &TypedProgram) -> BTreeMap<usize, Vec<Formula>> {
    p.loops.iter().map(|l| (l.id, l.golden.clone())).collect()
}

#[test]
fn loop_free_program_has_one_post_obligation() {
    let p = load("method m(x: int) ensures x == \\old(x) + 1; { x := x + 1; }");
    let set = generate_vcs(&p, &BTreeMap::new()).unwrap();
    assert_eq!(set.vcs.len(), 1);
    assert_eq!(set.vcs[0].kind, VcKind::Post { clause: 0 });
    let r = prover().prove_program(&p, &BTreeMap::new()).unwrap();
    assert!(r.full_proof);
}

#[test]
fn identities_and_falsifiable_sentences() {
    let types: BTreeMap<Ident, Type> = [
        ("x".to_string(), Type::Int),
        ("a".to_string(), Type::IntArray),
        ("lo".to_string(), Type::Int),
        ("hi".to_string(), Type::Int),
    ]
    .into_iter()
    .collect();
    let v = prover()
        .implied(&types, &[], &[f("x == x"), f("sorted(a, lo, hi)")])
        .unwrap();
    assert_eq!(v[0], Verdict::Valid);
    assert!(matches!(v[1], Verdict::Invalid { .. }), "{v:?}");
}

#[test]
fn single_invalid_goal_carries_a_model() {
    let types: BTreeMap<Ident, Type> = [("x".to_string(), Type::Int)].into_iter().collect();
    let v = prover().implied(&types, &[], &[f("x > 0")]).unwrap();
    let Verdict::Invalid { model: Some(m) } = &v[0] else {
        panic!("{v:?}")
    };
    assert!(m.contains("x.c"));
}

#[test]
fn binary_search_initiation_of_offset_bound() {
    let p = bsearch();
    let invs = [(0, vec![f("low <= high + 1")])].into_iter().collect();
    let set = generate_vcs(&p, &invs).unwrap();
    let v = prover().check(&set, |v| matches!(v.kind, VcKind::Initiation { .. }), "t");
    assert_eq!(v.len(), 1);
    assert!(v.values().all(Verdict::is_valid));
}

#[test]
fn binary_search_golden_invariants_prove_it() {
    let p = bsearch();
    let r = prover().prove_program(&p, &golden(&p)).unwrap();
    let bad: Vec<_> = r.obligations.iter().filter(|o| !o.verdict.is_valid()).collect();
    assert!(r.full_proof, "{bad:#?}");
}

#[test]
fn bounding_invariants_alone_miss_the_not_found_post() {
    let p = bsearch();
    let bounds: Vec<Formula> = p.loops[0].golden[..3].to_vec();
    let r = prover().prove_program(&p, &[(0, bounds)].into_iter().collect()).unwrap();
    assert!(!r.full_proof);
    assert!(r
        .obligations
        .iter()
        .any(|o| matches!(o.kind, VcKind::Post { .. }) && !o.verdict.is_valid()));
}

#[test]
fn houdini_keeps_the_inductive_subset() {
    let p = load(
        "method m(n: int) requires n >= 0; { var i: int; i := 0; while (i < n) { i := i + 1; } }",
    );
    let cs: Vec<Candidate> = ["i >= 0", "i <= n", "i == 5"]
        .iter()
        .map(|s| Candidate::new(0, f(s), Origin::Template))
        .collect();
    let r = prover().houdini(&p, &[(0, cs)].into_iter().collect());
    let proved: BTreeSet<String> = r.proved[&0].iter().map(|c| c.key.clone()).collect();
    assert_eq!(proved, ["0 <= i", "i <= n"].iter().map(|s| s.to_string()).collect());
    assert_eq!(r.rejected.len(), 1);
    assert_eq!(r.rejected[0].key, "5 == i");
    assert!(r.proved[&0].iter().all(|c| c.status == Status::Proved));
}

#[test]
fn houdini_on_nothing() {
    let r = prover().houdini(&bsearch(), &BTreeMap::new());
    assert!(r.proved.is_empty());
    assert!(r.rejected.is_empty());
}

#[test]
fn tautology_queries() {
    let p = bsearch();
    let types = &p.env().vars;
    let pr = prover();
    let v = pr.implied(types, &[], &[f("low <= low")]).unwrap();
    assert_eq!(v, vec![Verdict::Valid]);
    let ctx = [f("fromIndex <= low"), f("0 <= fromIndex")];
    let v = pr
        .implied(types, &ctx, &[f("low < 0 ==> !has(a, fromIndex, mid, key)")])
        .unwrap();
    assert_eq!(v, vec![Verdict::Valid]);
    let ctx = [f("fromIndex <= low"), f("low <= high + 1"), f("high < toIndex")];
    let v = pr.implied(types, &ctx, &[f("!has(a, fromIndex, low, key)")]).unwrap();
    assert!(!v[0].is_valid());
}

#[test]
fn equivalence_up_to_rewriting() {
    let p = bsearch();
    let types = &p.env().vars;
    let pr = prover();
    assert!(pr.equivalent(types, &f("low <= high + 1"), &f("low - 1 <= high")));
    assert!(pr.equivalent(
        types,
        &f("!has(a, high + 1, toIndex, key)"),
        &f("!(has(a, 1 + high, toIndex, key))")
    ));
    assert!(!pr.equivalent(types, &f("low <= high"), &f("low <= high + 1")));
}

#[test]
fn every_corpus_program_is_provable_with_its_golden_invariants() {
    let pr = prover();
    for entry in std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("mlw") {
            continue;
        }
        let p = load(&std::fs::read_to_string(&path).unwrap());
        let r = pr.prove_program(&p, &golden(&p)).unwrap();
        let bad: Vec<_> = r.obligations.iter().filter(|o| !o.verdict.is_valid()).collect();
        assert!(r.full_proof, "{}: {bad:#?}", path.display());
        // and the golden set is inductive on its own
        let cands = p
            .loops
            .iter()
            .map(|l| {
                let cs = l
                    .golden
                    .iter()
                    .map(|g| Candidate::new(l.id, g.clone(), Origin::Given))
                    .collect();
                (l.id, cs)
            })
            .collect();
        let h = pr.houdini(&p, &cands);
        assert!(h.rejected.is_empty(), "{}: {:?}", path.display(), h.rejected);
    }
}
