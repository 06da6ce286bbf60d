//! Precondition-respecting random test generation with branch feedback.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::candidate::Candidate;
use crate::interp::{
    check_candidates_on_trace, Branch, Env, Interpreter, Layout, Outcome, Trace, Value, Verdict,
    DEFAULT_STEP_LIMIT,
};
use crate::lang::{Expr, Type, TypedProgram};

/// Upper bound on the cumulative suite size.
pub const SUITE_CAP: usize = 5000;
const MAX_ARRAY_LEN: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TestGenError {
    #[error("no input satisfying the precondition was found in {budget} attempts")]
    EmptySuite { budget: usize },
}

#[derive(Clone, Debug)]
pub struct TestCase {
    /// Initial slot state (parameters plus default locals).
    pub input: Vec<Value>,
    pub trace: Arc<Trace>,
}

#[derive(Clone, Debug, Default)]
pub struct TestSuite {
    pub tests: Vec<TestCase>,
    pub covered: BTreeSet<Branch>,
    pub seed: u64,
    pub budget_spent: usize,
    seen: HashSet<Vec<Value>>,
}

impl TestSuite {
    pub fn new(seed: u64) -> TestSuite {
        TestSuite {
            seed,
            ..TestSuite::default()
        }
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn traces(&self) -> impl Iterator<Item = &Trace> {
        self.tests.iter().map(|t| &*t.trace)
    }

    /// Add a Normal test unless its input is already present.
    pub fn push(&mut self, input: Vec<Value>, trace: Arc<Trace>) -> bool {
        if !trace.is_normal() || !self.seen.insert(input.clone()) {
            return false;
        }
        self.covered.extend(trace.branches.iter().copied());
        self.tests.push(TestCase { input, trace });
        true
    }

    /// Set union keyed on input, then the size cap.
    pub fn merge(&mut self, other: &TestSuite) {
        for t in &other.tests {
            self.push(t.input.clone(), t.trace.clone());
        }
        self.budget_spent += other.budget_spent;
        self.enforce_cap(SUITE_CAP);
    }

    /// Keep one test per distinct branch set first, then fill up to `cap`
    /// in insertion order.
    pub fn enforce_cap(&mut self, cap: usize) {
        if self.tests.len() <= cap {
            return;
        }
        let mut keep = vec![false; self.tests.len()];
        let mut sets = HashSet::new();
        let mut kept = 0;
        for (i, t) in self.tests.iter().enumerate() {
            if kept < cap && sets.insert(t.trace.branches.clone()) {
                keep[i] = true;
                kept += 1;
            }
        }
        for k in keep.iter_mut() {
            if kept >= cap {
                break;
            }
            if !*k {
                *k = true;
                kept += 1;
            }
        }
        let mut it = keep.into_iter();
        self.tests.retain(|_| it.next().unwrap());
        self.seen = self.tests.iter().map(|t| t.input.clone()).collect();
    }

    /// JSON view for `--dump-tests`.
    pub fn to_json(&self, layout: &Layout) -> serde_json::Value {
        #[derive(Serialize)]
        struct Row<'a> {
            input: BTreeMap<&'a str, &'a Value>,
            outcome: &'a Outcome,
            branches: &'a BTreeSet<Branch>,
        }
        let rows: Vec<Row> = self
            .tests
            .iter()
            .map(|t| Row {
                input: layout.names[..layout.params]
                    .iter()
                    .map(String::as_str)
                    .zip(t.input.iter())
                    .collect(),
                outcome: &t.trace.outcome,
                branches: &t.trace.branches,
            })
            .collect();
        serde_json::json!({
            "seed": self.seed,
            "budget_spent": self.budget_spent,
            "covered_branches": self.covered.len(),
            "tests": rows,
        })
    }
}

#[derive(Clone, Debug)]
pub struct FalsificationTarget {
    pub candidate: Candidate,
    pub hit: bool,
    pub witness: Option<Env>,
}

struct Generator {
    interp: Interpreter,
    layout: Layout,
    rng: ChaCha8Rng,
    literals: Vec<i64>,
    sorted_params: BTreeSet<usize>,
    corpus: Vec<Vec<Value>>,
    corpus_branches: Vec<BTreeSet<Branch>>,
    hits: BTreeMap<Branch, usize>,
}

impl Generator {
    fn new(program: &TypedProgram, seed: u64) -> Generator {
        let interp = Interpreter::new(program);
        let layout = interp.layout().clone();
        let mut lits = BTreeSet::new();
        for n in program.literals() {
            for d in [-1, 0, 1] {
                if let Some(v) = n.checked_add(d) {
                    lits.insert(v);
                }
            }
        }
        let mut sorted_params = BTreeSet::new();
        for f in &program.pre {
            collect_sorted(f, &layout, &mut sorted_params);
        }
        Generator {
            interp,
            layout,
            rng: ChaCha8Rng::seed_from_u64(seed),
            literals: lits.into_iter().collect(),
            sorted_params,
            corpus: Vec::new(),
            corpus_branches: Vec::new(),
            hits: BTreeMap::new(),
        }
    }

    fn element(&mut self) -> i64 {
        match self.rng.gen_range(0..10) {
            0..=6 => self.rng.gen_range(-3..=3),
            7 if !self.literals.is_empty() => *self.literals.choose(&mut self.rng).unwrap(),
            _ => self.rng.gen_range(-10..=10),
        }
    }

    fn array(&mut self, slot: usize, others: &[Value]) -> Value {
        if self.rng.gen_bool(0.06) {
            return Value::Null;
        }
        let copyable: Vec<&Value> = others.iter().filter(|v| matches!(v, Value::Array(_))).collect();
        if !copyable.is_empty() && self.rng.gen_bool(0.25) {
            return copyable.choose(&mut self.rng).copied().unwrap().clone();
        }
        let len = self.rng.gen_range(0..=MAX_ARRAY_LEN);
        let mut v: Vec<i64> = (0..len).map(|_| self.element()).collect();
        if self.sorted_params.contains(&slot) && self.rng.gen_bool(0.9) {
            v.sort();
        }
        Value::Array(v)
    }

    fn int(&mut self, arrays: &[&Vec<i64>]) -> i64 {
        let len = arrays
            .choose(&mut self.rng)
            .map(|a| a.len() as i64)
            .unwrap_or(MAX_ARRAY_LEN as i64);
        match self.rng.gen_range(0..20) {
            0..=6 => self.rng.gen_range(0..=len),
            7..=11 => self.rng.gen_range(-2..=2),
            12..=14 if !self.literals.is_empty() => *self.literals.choose(&mut self.rng).unwrap(),
            15..=17 => {
                let elems: Vec<i64> = arrays.iter().flat_map(|a| a.iter().copied()).collect();
                elems
                    .choose(&mut self.rng)
                    .copied()
                    .unwrap_or_else(|| self.rng.gen_range(-3..=3))
            }
            _ => self.rng.gen_range(-10..=10),
        }
    }

    fn fresh(&mut self) -> Vec<Value> {
        let n = self.layout.params;
        let mut state: Vec<Value> = self.layout.types.iter().map(|t| Value::default_for(*t)).collect();
        for i in 0..n {
            if self.layout.types[i] == Type::IntArray {
                let before = state[..i].to_vec();
                state[i] = self.array(i, &before);
            }
        }
        for i in 0..n {
            match self.layout.types[i] {
                Type::Int => {
                    let arrays = arrays_of(&state[..n]);
                    state[i] = Value::Int(self.int(&arrays));
                }
                Type::Bool => state[i] = Value::Bool(self.rng.gen()),
                Type::IntArray => {}
            }
        }
        state
    }

    fn mutate(&mut self, base: &[Value]) -> Vec<Value> {
        let mut state = base.to_vec();
        let n = self.layout.params;
        if n == 0 {
            return state;
        }
        let rounds = self.rng.gen_range(1..=2);
        for _ in 0..rounds {
            let i = self.rng.gen_range(0..n);
            let arrays: Vec<Vec<i64>> = arrays_of(&state[..n]).into_iter().cloned().collect();
            let refs: Vec<&Vec<i64>> = arrays.iter().collect();
            state[i] = match &state[i] {
                Value::Int(x) => match self.rng.gen_range(0..4) {
                    0 => Value::Int(x.saturating_add(1)),
                    1 => Value::Int(x.saturating_sub(1)),
                    _ => Value::Int(self.int(&refs)),
                },
                Value::Bool(b) => Value::Bool(!b),
                Value::Null => {
                    let others = state[..n].to_vec();
                    self.array(i, &others)
                }
                Value::Array(a) => {
                    let mut a = a.clone();
                    match self.rng.gen_range(0..5) {
                        0 if !a.is_empty() => {
                            let k = self.rng.gen_range(0..a.len());
                            a[k] = self.element();
                        }
                        1 if a.len() < MAX_ARRAY_LEN => a.push(self.element()),
                        2 if !a.is_empty() => {
                            a.pop();
                        }
                        3 => {
                            let others = state[..n].to_vec();
                            let v = self.array(i, &others);
                            if let Value::Array(b) = v {
                                a = b;
                            }
                        }
                        _ => a.sort(),
                    }
                    if self.sorted_params.contains(&i) && self.rng.gen_bool(0.7) {
                        a.sort();
                    }
                    Value::Array(a)
                }
            };
        }
        state
    }

    fn next_input(&mut self) -> Vec<Value> {
        if self.corpus.is_empty() || self.rng.gen_bool(0.4) {
            return self.fresh();
        }
        // bias toward inputs that reach the least-hit branch
        let pick = if self.rng.gen_bool(0.5) {
            let rarest = self
                .hits
                .iter()
                .min_by_key(|(_, n)| **n)
                .map(|(b, _)| *b);
            let holders: Vec<usize> = (0..self.corpus.len())
                .filter(|i| rarest.is_some_and(|b| self.corpus_branches[*i].contains(&b)))
                .collect();
            holders.choose(&mut self.rng).copied()
        } else {
            None
        };
        let i = pick.unwrap_or_else(|| self.rng.gen_range(0..self.corpus.len()));
        let base = self.corpus[i].clone();
        self.mutate(&base)
    }

    /// Run one input; returns the trace and whether it covered anything new.
    fn step(&mut self, input: Vec<Value>) -> (Vec<Value>, Trace, bool) {
        let trace = self.interp.run_state(input.clone(), DEFAULT_STEP_LIMIT);
        let mut new = false;
        for b in &trace.branches {
            let n = self.hits.entry(*b).or_insert(0);
            if *n == 0 {
                new = true;
            }
            *n += 1;
        }
        if new {
            self.corpus.push(input.clone());
            self.corpus_branches.push(trace.branches.clone());
        }
        (input, trace, new)
    }

    fn keep_in_corpus(&mut self, input: Vec<Value>, trace: &Trace) {
        self.corpus.push(input);
        self.corpus_branches.push(trace.branches.clone());
    }
}

fn arrays_of(state: &[Value]) -> Vec<&Vec<i64>> {
    state
        .iter()
        .filter_map(|v| match v {
            Value::Array(a) => Some(a),
            _ => None,
        })
        .collect()
}

fn collect_sorted(f: &Expr, layout: &Layout, out: &mut BTreeSet<usize>) {
    if let Expr::Call(name, args) = f {
        if name == "sorted" {
            if let Some(Expr::Var(a)) = args.first() {
                if let Some(s) = layout.slot(a) {
                    out.insert(s);
                }
            }
        }
    }
    for c in f.children() {
        collect_sorted(c, layout, out);
    }
}

/// Feedback-directed generation of up to `budget` inputs; keeps the Normal ones.
pub fn generate_valid_inputs(
    program: &TypedProgram,
    budget: usize,
    seed: u64,
) -> Result<TestSuite, TestGenError> {
    let mut g = Generator::new(program, seed);
    let mut suite = TestSuite::new(seed);
    for _ in 0..budget.max(1) {
        let input = g.next_input();
        let (input, trace, _) = g.step(input);
        suite.budget_spent += 1;
        suite.push(input, Arc::new(trace));
    }
    if suite.is_empty() {
        return Err(TestGenError::EmptySuite { budget });
    }
    suite.enforce_cap(SUITE_CAP);
    Ok(suite)
}

/// Search for inputs violating each target; every Normal run is returned.
pub fn falsify(
    program: &TypedProgram,
    targets: &[Candidate],
    budget: usize,
    seed: u64,
) -> (Vec<FalsificationTarget>, TestSuite) {
    let mut g = Generator::new(program, seed);
    let mut suite = TestSuite::new(seed);
    let mut out: Vec<FalsificationTarget> = targets
        .iter()
        .map(|c| FalsificationTarget {
            candidate: c.clone(),
            hit: false,
            witness: None,
        })
        .collect();
    let mut open: Vec<usize> = (0..out.len()).collect();
    for _ in 0..budget.max(1) {
        let input = g.next_input();
        let (input, trace, new) = g.step(input);
        suite.budget_spent += 1;
        if trace.is_normal() && !open.is_empty() {
            let pending: Vec<Candidate> = open.iter().map(|i| out[*i].candidate.clone()).collect();
            let verdicts = check_candidates_on_trace(&g.interp, &pending, &trace);
            let mut still = Vec::new();
            let mut any = false;
            for (i, v) in open.iter().zip(verdicts) {
                if let Verdict::Violated(_) = v {
                    out[*i].hit = true;
                    out[*i].witness = Some(env_of(&g.layout, &input));
                    any = true;
                } else {
                    still.push(*i);
                }
            }
            open = still;
            // a violation is a coverage goal of its own
            if any && !new {
                g.keep_in_corpus(input.clone(), &trace);
            }
        }
        suite.push(input, Arc::new(trace));
    }
    suite.enforce_cap(SUITE_CAP);
    (out, suite)
}

/// Named parameter bindings of a slot state.
pub fn env_of(layout: &Layout, state: &[Value]) -> Env {
    let mut env = Env::new();
    for (n, v) in layout.names[..layout.params].iter().zip(state.iter()) {
        env.vars.insert(n.clone(), v.clone());
    }
    env
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate::Origin;
    use crate::interp::run;
    use crate::lang::{parse_formula, parse_program, typecheck};

    fn load(src: &str) -> TypedProgram {
        typecheck(&parse_program(src).unwrap()).unwrap()
    }

    fn bsearch() -> TypedProgram {
        load(include_str!("../../../corpus/binarySearch0.mlw"))
    }

    #[test]
    fn suites_are_reproducible() {
        let p = bsearch();
        let a = generate_valid_inputs(&p, 200, 7).unwrap();
        let b = generate_valid_inputs(&p, 200, 7).unwrap();
        let ins = |s: &TestSuite| s.tests.iter().map(|t| t.input.clone()).collect::<Vec<_>>();
        assert_eq!(ins(&a), ins(&b));
        assert_eq!(a.covered, b.covered);
    }

    #[test]
    fn only_normal_distinct_tests_are_kept() {
        let a = generate_valid_inputs(&bsearch(), 300, 1).unwrap();
        assert!(a.tests.iter().all(|t| t.trace.is_normal()));
        let distinct: HashSet<_> = a.tests.iter().map(|t| t.input.clone()).collect();
        assert_eq!(distinct.len(), a.len());
        assert_eq!(a.budget_spent, 300);
    }

    #[test]
    fn both_result_branches_of_binary_search() {
        // calibration: both branches of the final `if` in nearly every seed
        let p = bsearch();
        let mut both = 0;
        for seed in 0..30 {
            let s = generate_valid_inputs(&p, 500, seed).unwrap();
            if s.covered.contains(&Branch::If { id: 1, taken: true })
                && s.covered.contains(&Branch::If { id: 1, taken: false })
            {
                both += 1;
            }
        }
        assert!(both >= 27, "{both}/30");
    }

    #[test]
    fn unsatisfiable_precondition() {
        let p = load("method m(x: int) requires false; { skip; }");
        assert_eq!(
            generate_valid_inputs(&p, 50, 0).unwrap_err(),
            TestGenError::EmptySuite { budget: 50 }
        );
    }

    #[test]
    fn easy_precondition_small_budget() {
        let p = load(include_str!("../../../corpus/fill_a.mlw"));
        assert!(!generate_valid_inputs(&p, 10, 3).unwrap().is_empty());
    }

    fn target(f: &str) -> Candidate {
        Candidate::new(0, parse_formula(f).unwrap(), Origin::Mutation { wave: 3 })
    }

    #[test]
    fn falsification_hits_are_replayable() {
        let p = bsearch();
        let targets = vec![
            target("!has(a, high, toIndex, key)"),
            target("fromIndex <= low"),
            target("false"),
        ];
        let (res, suite) = falsify(&p, &targets, 2000, 11);
        assert!(res[0].hit);
        assert!(!res[1].hit);
        assert!(res[2].hit);
        assert!(!suite.is_empty());
        let interp = Interpreter::new(&p);
        for r in res.iter().filter(|r| r.hit) {
            let t = run(&p, r.witness.as_ref().unwrap(), DEFAULT_STEP_LIMIT);
            let v = check_candidates_on_trace(&interp, std::slice::from_ref(&r.candidate), &t);
            assert!(matches!(v[0], Verdict::Violated(_)));
        }
    }

    #[test]
    fn cap_prefers_branch_diversity() {
        let mut s = generate_valid_inputs(&bsearch(), 400, 2).unwrap();
        let sets_before: HashSet<_> = s.tests.iter().map(|t| t.trace.branches.clone()).collect();
        let cap = sets_before.len() + 1;
        s.enforce_cap(cap);
        assert_eq!(s.len(), cap.min(s.len()));
        let sets_after: HashSet<_> = s.tests.iter().map(|t| t.trace.branches.clone()).collect();
        assert_eq!(sets_before, sets_after);
    }
}
