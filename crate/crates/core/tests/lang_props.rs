mod common;

use common::*;
use forge::interp::{eval_formula, Env, Value};
use forge::lang::predicates::{library, PredArg};
use forge::lang::{parse_formula, parse_program, subexpressions, Type};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn corpus_programs_round_trip() {
    let mut all = corpus();
    all.push(("sort".into(), std::fs::read_to_string(corpus_dir().join("extra/sort.mlw")).unwrap()));
    for (name, src) in all {
        let p = parse_program(&src).unwrap();
        let again = parse_program(&p.to_string()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(again, p, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn formulas_round_trip((f, _) in bool_expr(3, vec![])) {
        let printed = f.to_string();
        let back = parse_formula(&printed).unwrap();
        prop_assert_eq!(back, f, "{}", printed);
    }

    #[test]
    fn int_occurrences_match_the_construction((f, n) in bool_expr(3, vec![])) {
        let env = formula_env();
        prop_assert_eq!(subexpressions(&f, Type::Int, &env).len(), n);
    }
}

fn random_env(rng: &mut ChaCha8Rng, params: &[(String, Type)]) -> (Env, Vec<Value>) {
    let mut env = Env::new();
    let mut vals = Vec::new();
    for (n, t) in params {
        let v = match t {
            Type::IntArray if rng.gen_bool(0.05) => Value::Null,
            Type::IntArray => {
                let len = rng.gen_range(0..7);
                Value::Array((0..len).map(|_| rng.gen_range(-3..4)).collect())
            }
            _ => Value::Int(rng.gen_range(-2..9)),
        };
        env = env.with(n, v.clone());
        vals.push(v);
    }
    (env, vals)
}

#[test]
fn executable_and_logical_bodies_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for def in library() {
        let mut checked = 0;
        let mut tries = 0;
        while checked < 1000 {
            tries += 1;
            assert!(tries < 200_000, "{}: domain too narrow for the sampler", def.name);
            let (env, vals) = random_env(&mut rng, &def.params);
            if eval_formula(&def.domain_pre, &env) != Ok(true) {
                continue;
            }
            let args: Vec<PredArg> = vals
                .iter()
                .map(|v| match v {
                    Value::Int(n) => PredArg::Int(*n),
                    Value::Array(a) => PredArg::Array(Some(a.as_slice())),
                    _ => PredArg::Array(None),
                })
                .collect();
            let logic = eval_formula(&def.logic_body, &env).expect("body defined on the domain");
            assert_eq!((def.exec)(&args), Some(logic), "{} on {:?}", def.name, env);
            checked += 1;
        }
    }
}
