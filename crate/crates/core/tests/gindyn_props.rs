mod common;

use std::collections::HashSet;

use common::*;
use forge::exec::Strategy as Exec;
use forge::gindyn::{
    apply_aging, apply_substitution, apply_weakening, build_pools, dynamic_validate,
    extract_predicates, run_wave, Step, Wave, WaveKind, DEFAULT_MUTANT_CAP,
};
use forge::lang::Expr;
use forge::templates::Observations;
use forge::testgen::generate_valid_inputs;
use proptest::prelude::*;

fn occurrences(f: &Expr, name: &str) -> usize {
    let own = usize::from(matches!(f, Expr::Var(v) if v == name));
    own + f.children().into_iter().map(|c| occurrences(c, name)).sum::<usize>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn operator_counts(
        (f, s) in bool_expr(3, vec![]),
        ints in proptest::collection::vec(int_expr(1, vec![]), 0..5),
        bools in proptest::collection::vec(bool_expr(1, vec![]), 0..4),
    ) {
        let env = formula_env();
        let subst: usize = ints.iter().map(|(e, _)| apply_substitution(&f, e, &env).len()).sum();
        prop_assert_eq!(subst, s * ints.len());
        prop_assert_eq!(apply_aging(&f, &env).len(), 2 * s);
        let weak: usize = bools.iter().map(|(b, _)| apply_weakening(&f, b).len()).sum();
        prop_assert_eq!(weak, 2 * bools.len());
    }

    #[test]
    fn substitution_hits_each_occurrence_once((f, s) in bool_expr(3, vec![])) {
        let env = formula_env();
        let marker = Expr::var("marker");
        let out = apply_substitution(&f, &marker, &env);
        prop_assert_eq!(out.len(), s);
        for m in &out {
            prop_assert_eq!(occurrences(m, "marker"), 1);
        }
        let distinct: HashSet<String> = out.iter().map(|m| m.to_string()).collect();
        prop_assert_eq!(distinct.len(), s);
    }
}

#[test]
fn validation_is_independent_of_batch_size_on_the_corpus() {
    for name in ["binarySearch0", "fill_b", "indexOf", "vecswap"] {
        let p = corpus_program(name);
        let suite = generate_valid_inputs(&p, 150, 11).unwrap();
        let obs = Observations::new(&p, &suite);
        for site in &p.loops {
            let pool = extract_predicates(build_pools(&p, site, &p.post), &p.post);
            let w = Wave {
                id: 1,
                kind: WaveKind::Clause,
                steps: vec![Step::Substitute(1), Step::Aging],
                restricted: true,
            };
            let ms = run_wave(&w, &p.post, &pool, p.env(), &mut HashSet::new(), DEFAULT_MUTANT_CAP);
            let n = ms.mutants.len().max(1);
            let one = dynamic_validate(&ms, &obs, site, 1, Exec::Sequential);
            for batch in [7, n] {
                assert_eq!(dynamic_validate(&ms, &obs, site, batch, Exec::default()), one, "{name}");
            }
        }
    }
}
