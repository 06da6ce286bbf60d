mod common;

use std::collections::BTreeSet;

use common::*;
use forge::candidate::{Candidate, Origin};
use forge::exec::Strategy;
use forge::interp::{check_candidates_on_trace, Interpreter, Verdict, DEFAULT_STEP_LIMIT};
use forge::lang::parse_formula;
use forge::templates::{filter_by_suite, instantiate_templates, Observations};
use forge::testgen::{falsify, generate_valid_inputs, TestSuite};

fn inputs(s: &TestSuite) -> Vec<Vec<forge::interp::Value>> {
    s.tests.iter().map(|t| t.input.clone()).collect()
}

#[test]
fn suites_reproduce_from_the_seed() {
    for (name, src) in corpus() {
        let p = load(&src);
        for seed in [0, 5] {
            let a = generate_valid_inputs(&p, 120, seed).unwrap();
            let b = generate_valid_inputs(&p, 120, seed).unwrap();
            assert_eq!(inputs(&a), inputs(&b), "{name}");
            assert_eq!(a.covered, b.covered, "{name}");
        }
    }
}

#[test]
fn falsification_hits_replay_as_violations() {
    let p = corpus_program("binarySearch0");
    let interp = Interpreter::new(&p);
    let targets: Vec<Candidate> = ["low <= high", "low == fromIndex", "high < toIndex", "mid >= 0", "fromIndex <= low"]
        .iter()
        .map(|s| Candidate::new(0, parse_formula(s).unwrap(), Origin::Template))
        .collect();
    let (hits, _) = falsify(&p, &targets, 300, 3);
    let hit: BTreeSet<String> = hits.iter().filter(|h| h.hit).map(|h| h.candidate.formula.to_string()).collect();
    // the other three are invariants
    assert_eq!(hit, ["low <= high", "low == fromIndex"].iter().map(|s| s.to_string()).collect());
    for h in hits.iter().filter(|h| h.hit) {
        let trace = interp.run(h.witness.as_ref().unwrap(), DEFAULT_STEP_LIMIT);
        let v = check_candidates_on_trace(&interp, std::slice::from_ref(&h.candidate), &trace);
        assert!(matches!(v[0], Verdict::Violated(_)), "{}", h.candidate);
    }
}

#[test]
fn coverage_never_shrinks_across_iterations() {
    for name in ["binarySearch0", "removeRange", "vecswap"] {
        let p = corpus_program(name);
        let mut suite = generate_valid_inputs(&p, 60, 1).unwrap();
        let mut before = suite.covered.clone();
        for it in 2..6 {
            let (_, fresh) = falsify(&p, &[], 60, it);
            suite.merge(&fresh);
            assert!(suite.covered.is_superset(&before), "{name} iteration {it}");
            before = suite.covered.clone();
        }
    }
}

fn mined(p: &forge::lang::TypedProgram, suite: &TestSuite) -> Vec<Candidate> {
    let obs = Observations::new(p, suite);
    let mut all = Vec::new();
    for site in &p.loops {
        all.extend(instantiate_templates(p, site, &obs));
    }
    filter_by_suite(all, &obs, Strategy::default())
}

#[test]
fn retained_templates_survive_every_test() {
    for (name, src) in corpus() {
        let p = load(&src);
        let interp = Interpreter::new(&p);
        let suite = generate_valid_inputs(&p, 150, 2).unwrap();
        let kept = mined(&p, &suite);
        assert!(!kept.is_empty(), "{name}");
        for t in &suite.tests {
            for (c, v) in kept.iter().zip(check_candidates_on_trace(&interp, &kept, &t.trace)) {
                assert_eq!(v, Verdict::Survives, "{name}: {c}");
            }
        }
        assert_eq!(mined(&p, &suite), kept, "{name}: mining is deterministic");
    }
}

#[test]
fn more_tests_never_grow_the_surviving_set() {
    for (name, src) in corpus() {
        let p = load(&src);
        let small = generate_valid_inputs(&p, 40, 4).unwrap();
        let mut big = small.clone();
        big.merge(&generate_valid_inputs(&p, 200, 9).unwrap());
        // one fixed candidate list, filtered by both suites
        let obs = Observations::new(&p, &small);
        let mut cands = Vec::new();
        for site in &p.loops {
            cands.extend(instantiate_templates(&p, site, &obs));
        }
        let keys = |cs: Vec<Candidate>| cs.into_iter().map(|c| (c.loop_id, c.key)).collect::<BTreeSet<_>>();
        let on_small = keys(filter_by_suite(cands.clone(), &obs, Strategy::default()));
        let on_big = keys(filter_by_suite(cands, &Observations::new(&p, &big), Strategy::default()));
        assert!(on_big.is_subset(&on_small), "{name}");
    }
}
