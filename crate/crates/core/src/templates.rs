//! Fixed-template candidate mining over loop-head observations.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::candidate::{Candidate, Origin, Status};
use crate::exec::{par_map_owned, Strategy};
use crate::interp::{compile, first_violation, loop_samples, Ctx, Layout, Sample, Value};
use crate::lang::{BinOp, Expr, LoopSite, Type, TypedProgram};
use crate::testgen::TestSuite;

/// Loop-head observations of a suite, per loop.
#[derive(Clone, Debug)]
pub struct Observations {
    pub layout: Layout,
    pub per_loop: BTreeMap<usize, Vec<Sample>>,
}

impl Observations {
    pub fn new(program: &TypedProgram, suite: &TestSuite) -> Observations {
        let layout = Layout::of_program(program);
        let per_loop = program
            .loops
            .iter()
            .map(|l| (l.id, loop_samples(suite.traces(), l.id)))
            .collect();
        Observations { layout, per_loop }
    }

    pub fn samples(&self, loop_id: usize) -> &[Sample] {
        self.per_loop.get(&loop_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Whether `c` holds (and is defined) at every observation of its loop.
    pub fn survives(&self, c: &Candidate) -> bool {
        match compile(&c.formula, &self.layout) {
            Ok(code) => first_violation(&code, self.samples(c.loop_id)).is_none(),
            Err(_) => false,
        }
    }

    /// Values an Int term takes across the loop's observations; `None` if it
    /// is undefined somewhere.
    fn observed(&self, loop_id: usize, term: &Expr) -> Option<BTreeSet<i64>> {
        let code = compile(term, &self.layout).ok()?;
        let mut out = BTreeSet::new();
        for s in self.samples(loop_id) {
            let ctx = Ctx {
                cur: &s.cur,
                old: &s.old,
                result: None,
            };
            match ctx.eval(&code, &mut Vec::new()).ok()?.to_value() {
                Value::Int(n) => {
                    out.insert(n);
                }
                _ => return None,
            }
        }
        Some(out)
    }
}

fn int_terms(program: &TypedProgram, site: &LoopSite) -> Vec<Expr> {
    let mut terms = Vec::new();
    let mut lengths = Vec::new();
    for (name, ty) in program.all_vars() {
        if !site.in_scope_vars.contains(&name) {
            continue;
        }
        match ty {
            Type::Int => terms.push(Expr::Var(name)),
            Type::IntArray => lengths.push(Expr::Length(Box::new(Expr::Var(name)))),
            Type::Bool => {}
        }
    }
    terms.extend(lengths);
    terms
}

/// Instantiate the catalog at `site`, with constants drawn from the values
/// observed in `suite` and from program literals.
pub fn instantiate_templates(
    program: &TypedProgram,
    site: &LoopSite,
    obs: &Observations,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut emit = |f: Expr| {
        let c = Candidate::new(site.id, f, Origin::Template);
        if seen.insert(c.key.clone()) {
            out.push(c);
        }
    };
    let lits = program.literals();
    let terms = int_terms(program, site);
    let ge = |l: &Expr, r: &Expr| Expr::bin(BinOp::Ge, l.clone(), r.clone());
    let le = |l: &Expr, r: &Expr| Expr::bin(BinOp::Le, l.clone(), r.clone());
    for t in terms.iter().filter(|t| matches!(t, Expr::Var(_))) {
        let Some(values) = obs.observed(site.id, t) else {
            continue;
        };
        let mut consts: BTreeSet<i64> = lits.clone();
        consts.insert(0);
        if let (Some(lo), Some(hi)) = (values.first(), values.last()) {
            consts.insert(*lo);
            consts.insert(*hi);
        }
        for c in &consts {
            let c = Expr::Int(*c);
            emit(ge(t, &c));
            emit(le(t, &c));
            emit(Expr::bin(BinOp::Eq, t.clone(), c.clone()));
            emit(Expr::bin(BinOp::Ne, t.clone(), c));
        }
        if (2..=3).contains(&values.len()) {
            emit(Expr::or_all(
                values
                    .iter()
                    .map(|v| Expr::bin(BinOp::Eq, t.clone(), Expr::Int(*v)))
                    .collect(),
            ));
        }
    }
    for (i, x) in terms.iter().enumerate() {
        for y in &terms[i + 1..] {
            // `a.length` only appears next to an Int variable
            if !matches!(x, Expr::Var(_)) {
                continue;
            }
            for op in [BinOp::Lt, BinOp::Le, BinOp::Eq, BinOp::Ne, BinOp::Gt, BinOp::Ge] {
                emit(Expr::bin(op, x.clone(), y.clone()));
            }
            let plus1 = |e: &Expr| Expr::bin(BinOp::Add, e.clone(), Expr::Int(1));
            emit(le(x, &plus1(y)));
            emit(le(y, &plus1(x)));
        }
    }
    for (name, ty) in &program.params {
        if *ty == Type::Int && site.in_scope_vars.contains(name) {
            emit(Expr::bin(BinOp::Eq, Expr::var(name), Expr::Old(name.clone())));
        }
    }
    for (name, ty) in program.all_vars() {
        if !site.in_scope_vars.contains(&name) {
            continue;
        }
        match ty {
            Type::IntArray => {
                emit(Expr::bin(BinOp::Ne, Expr::var(&name), Expr::Null));
                emit(Expr::bin(BinOp::Eq, Expr::var(&name), Expr::Null));
            }
            Type::Bool => {
                emit(Expr::var(&name));
                emit(Expr::not(Expr::var(&name)));
            }
            Type::Int => {}
        }
    }
    out
}

/// Keep the candidates that hold at every observation of their loop.
pub fn filter_by_suite(
    candidates: Vec<Candidate>,
    obs: &Observations,
    strategy: Strategy,
) -> Vec<Candidate> {
    par_map_owned(strategy, candidates, |c| obs.survives(&c).then_some(c))
        .into_iter()
        .flatten()
        .map(|c| c.with_status(Status::Surviving))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, typecheck};
    use crate::testgen::generate_valid_inputs;

    fn load(src: &str) -> TypedProgram {
        typecheck(&parse_program(src).unwrap()).unwrap()
    }

    fn bsearch() -> TypedProgram {
        load(include_str!("../../../corpus/binarySearch0.mlw"))
    }

    fn keys(cs: &[Candidate]) -> BTreeSet<String> {
        cs.iter().map(|c| c.key.clone()).collect()
    }

    #[test]
    fn pairwise_relations_collapse_to_six_plus_offsets() {
        let p = load(
            "method m(low: int, high: int) { while (low < high) { low := low + 1; } }",
        );
        let suite = generate_valid_inputs(&p, 50, 0).unwrap();
        let obs = Observations::new(&p, &suite);
        let cs = instantiate_templates(&p, &p.loops[0], &obs);
        let pair: Vec<_> = cs
            .iter()
            .filter(|c| {
                let fv = c.formula.free_vars();
                fv.contains("low") && fv.contains("high")
            })
            .collect();
        assert_eq!(pair.len(), 8, "{pair:?}");
    }

    #[test]
    fn only_array_templates_without_ints() {
        let p = load("method m(a: int[]) { while (a == null) { skip; } }");
        let mut suite = TestSuite::new(0);
        // the loop is reachable only with a null array, which spins forever;
        // an empty suite still yields the array templates
        suite.budget_spent = 0;
        let obs = Observations::new(&p, &suite);
        let cs = instantiate_templates(&p, &p.loops[0], &obs);
        assert!(cs.iter().all(|c| c.key.contains("null")), "{cs:?}");
        assert_eq!(cs.len(), 2);
    }

    #[test]
    fn observed_value_sets_become_disjunctions() {
        let p = bsearch();
        let suite = generate_valid_inputs(&p, 300, 4).unwrap();
        let mut obs = Observations::new(&p, &suite);
        // restrict observations to two key values, as in the first iteration
        let slot = obs.layout.slot("key").unwrap();
        let distinct: BTreeSet<Value> = obs.per_loop[&0].iter().map(|s| s.cur[slot].clone()).collect();
        let two: Vec<Value> = distinct.into_iter().take(2).collect();
        assert_eq!(two.len(), 2);
        let samples: Vec<Sample> = obs.per_loop[&0]
            .iter()
            .filter(|s| two.contains(&s.cur[slot]))
            .cloned()
            .collect();
        obs.per_loop.insert(0, samples);
        let cs = instantiate_templates(&p, &p.loops[0], &obs);
        let want = crate::lang::key(
            &crate::lang::parse_formula(&format!("key == {} || key == {}", two[0], two[1])).unwrap(),
        );
        assert!(keys(&cs).contains(&want), "{want}");
    }

    #[test]
    fn filter_keeps_exactly_the_survivors() {
        let p = bsearch();
        let suite = generate_valid_inputs(&p, 400, 9).unwrap();
        let obs = Observations::new(&p, &suite);
        let cs = instantiate_templates(&p, &p.loops[0], &obs);
        let kept = filter_by_suite(cs.clone(), &obs, Strategy::Sequential);
        let ks = keys(&kept);
        assert!(ks.contains("fromIndex <= low"));
        assert!(ks.contains("a != null"));
        assert!(ks.contains("low <= high + 1"));
        assert!(!ks.contains("a == null"));
        assert!(kept.iter().all(|c| c.status == Status::Surviving));
        // re-check on the full suite
        assert!(kept.iter().all(|c| obs.survives(c)));
        let par = filter_by_suite(cs, &obs, Strategy::Parallel);
        assert_eq!(keys(&par), ks);
    }

    #[test]
    fn deterministic_order() {
        let p = bsearch();
        let suite = generate_valid_inputs(&p, 100, 5).unwrap();
        let obs = Observations::new(&p, &suite);
        let a = instantiate_templates(&p, &p.loops[0], &obs);
        let b = instantiate_templates(&p, &p.loops[0], &obs);
        assert_eq!(a, b);
    }
}
