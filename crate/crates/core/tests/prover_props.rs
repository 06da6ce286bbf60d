mod common;
#[path = "common/random_programs.rs"]
mod random_programs;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use forge::candidate::{Candidate, Origin};
use forge::exec::Strategy;
use forge::interp::{check_candidates_on_trace, Interpreter, Verdict as Dyn};
use forge::lang::TypedProgram;
use forge::prover::{generate_vcs, HoudiniResult, Prover, SolverConfig, VcKind};
use forge::templates::{filter_by_suite, instantiate_templates, Observations};
use forge::testgen::generate_valid_inputs;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn prover() -> Prover {
    Prover::new(SolverConfig::default())
}

/// Template candidates mined from a small suite, so that some are not
/// inductive.
fn candidates(p: &TypedProgram, seed: u64) -> BTreeMap<usize, Vec<Candidate>> {
    let suite = generate_valid_inputs(p, 25, seed).unwrap();
    let obs = Observations::new(p, &suite);
    let mut all = Vec::new();
    for site in &p.loops {
        all.extend(instantiate_templates(p, site, &obs));
    }
    let mut out: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
    for c in filter_by_suite(all, &obs, Strategy::default()) {
        out.entry(c.loop_id).or_default().push(c);
    }
    out
}

fn keys(r: &HoudiniResult) -> BTreeSet<(usize, String)> {
    r.proved.values().flatten().map(|c| (c.loop_id, c.key.clone())).collect()
}

/// Initiation and preservation of the proved set, by a separate prover.
fn inductive(p: &TypedProgram, r: &HoudiniResult) -> bool {
    let res = prover().prove_program(p, &r.formulas()).unwrap();
    res.obligations
        .iter()
        .filter(|o| matches!(o.kind, VcKind::Initiation { .. } | VcKind::Preservation { .. }))
        .all(|o| o.verdict.is_valid())
}

#[test]
fn houdini_on_random_programs() {
    if !solver_available() {
        eprintln!("no solver; skipped");
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pr = prover();
    let (mut proved, mut dropped) = (0, 0);
    for id in 0..20 {
        let src = random_programs::random_program(&mut rng, id);
        let p = load(&src);
        let cands = candidates(&p, id as u64);
        let r = pr.houdini(&p, &cands);
        assert!(inductive(&p, &r), "{src}");
        proved += keys(&r).len();
        dropped += cands.values().map(Vec::len).sum::<usize>() - keys(&r).len();
        let mut shuffled = cands.clone();
        for cs in shuffled.values_mut() {
            cs.shuffle(&mut rng);
        }
        assert_eq!(keys(&pr.houdini(&p, &shuffled)), keys(&r), "{src}");
    }
    assert!(proved > 0 && dropped > 0, "{proved} proved, {dropped} dropped");
}

#[test]
fn houdini_is_monotone_on_the_corpus() {
    if !solver_available() {
        return;
    }
    let pr = prover();
    for name in ["binarySearch0", "fill_a", "indexOf", "vecswap"] {
        let p = corpus_program(name);
        let mut base = candidates(&p, 1);
        let small = pr.houdini(&p, &base);
        for site in &p.loops {
            let extra = site.golden.iter().map(|g| Candidate::new(site.id, g.clone(), Origin::Given));
            base.entry(site.id).or_default().extend(extra);
        }
        let big = pr.houdini(&p, &base);
        assert!(keys(&small).is_subset(&keys(&big)), "{name}");
    }
}

#[test]
fn proved_invariants_hold_on_fresh_tests() {
    if !solver_available() {
        return;
    }
    let pr = prover();
    for (name, src) in corpus() {
        let p = load(&src);
        let proved = pr.houdini(&p, &candidates(&p, 3));
        let all: Vec<Candidate> = proved.proved.values().flatten().cloned().collect();
        let interp = Interpreter::new(&p);
        let suite = generate_valid_inputs(&p, 300, 77).unwrap();
        for t in &suite.tests {
            for (c, v) in all.iter().zip(check_candidates_on_trace(&interp, &all, &t.trace)) {
                assert_eq!(v, Dyn::Survives, "{name}: {c}");
            }
        }
    }
}

#[test]
fn vc_generation_is_stable() {
    for (name, src) in corpus() {
        let p = load(&src);
        let invs: BTreeMap<usize, Vec<_>> = p.loops.iter().map(|l| (l.id, l.golden.clone())).collect();
        let a = generate_vcs(&p, &invs).unwrap();
        let b = generate_vcs(&p, &invs).unwrap();
        let flat = |s: &forge::prover::VcSet| {
            let vcs: Vec<_> = s.vcs.iter().map(|v| (v.kind.clone(), v.facts, v.path.clone(), v.goal.clone())).collect();
            (s.facts.clone(), vcs)
        };
        assert_eq!(flat(&a), flat(&b), "{name}");
        assert!(!a.vcs.is_empty());
    }
}
