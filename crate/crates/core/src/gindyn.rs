//! Candidate invariants by mutation of the postcondition.
//!
//! Mutants are built in waves: a seed set derived from the postcondition is
//! pushed through a fixed sequence of operators (integer substitution, aging,
//! weakening), then filtered against the tests and pruned of formulas that
//! already follow from the verified invariants.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::{Candidate, Origin, Status};
use crate::exec::{par_map, Strategy};
use crate::lang::paths::replace_at;
use crate::lang::predicates::collection;
use crate::lang::{
    key, lookup, normalize, subexpressions, BinOp, Expr, Formula, LoopSite, Type, TypeEnv,
    TypedProgram, UnOp,
};
use crate::prover::{Prover, Verdict};
use crate::templates::Observations;

/// Raw mutants one wave may generate before it is cut short.
pub const DEFAULT_MUTANT_CAP: usize = 200_000;
/// Int-pool choices per integer slot during predicate extraction.
const SLOT_CHOICES: usize = 3;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExpressionPool {
    pub int: Vec<Expr>,
    /// Variables and the literals 0, 1 and -1 only.
    pub int_restricted: Vec<Expr>,
    pub arrays: Vec<Expr>,
    pub bools: Vec<Expr>,
    /// Predicate collections referenced by the postcondition.
    pub collections: BTreeSet<String>,
}

fn push_new(v: &mut Vec<Expr>, e: Expr) {
    if !v.contains(&e) {
        v.push(e);
    }
}

/// Int and array pools for `site`; the Bool pool stays empty.
pub fn build_pools(program: &TypedProgram, site: &LoopSite, post: &[Formula]) -> ExpressionPool {
    let mut pool = ExpressionPool::default();
    let in_scope = |n: &String| site.in_scope_vars.contains(n);
    let vars = program.all_vars();
    for (n, t) in vars.iter().filter(|(n, _)| in_scope(n)) {
        match t {
            Type::Int => {
                push_new(&mut pool.int, Expr::var(n));
                push_new(&mut pool.int_restricted, Expr::var(n));
            }
            Type::IntArray => push_new(&mut pool.arrays, Expr::var(n)),
            Type::Bool => {}
        }
    }
    for (n, t) in &program.params {
        if *t == Type::Int && in_scope(n) {
            push_new(&mut pool.int, Expr::Old(n.clone()));
        }
    }
    for c in [0, 1, -1] {
        push_new(&mut pool.int, Expr::Int(c));
        push_new(&mut pool.int_restricted, Expr::Int(c));
    }
    for c in program.literals() {
        push_new(&mut pool.int, Expr::Int(c));
    }
    for a in pool.arrays.clone() {
        push_new(&mut pool.int, Expr::Length(Box::new(a)));
    }
    let mut called = BTreeSet::new();
    for q in post {
        q.called_predicates(&mut called);
    }
    pool.collections = called
        .iter()
        .filter_map(|n| lookup(n))
        .map(|p| p.collection.to_string())
        .collect();
    pool
}

fn calls_in(f: &Formula, out: &mut Vec<(String, Vec<Expr>)>) {
    if let Expr::Call(n, args) = f {
        out.push((n.clone(), args.clone()));
    }
    for c in f.children() {
        calls_in(c, out);
    }
}

/// Argument choices for each parameter of `pred`, best first: arguments the
/// postcondition passes to the same predicate, then those it passes to
/// same-named parameters of other predicates, then the pool.
fn ranked_args(pred: &str, post: &[Formula], pool: &ExpressionPool) -> Vec<Vec<Expr>> {
    let def = lookup(pred).expect("library predicate");
    let mut calls = Vec::new();
    for q in post {
        calls_in(q, &mut calls);
    }
    def.params
        .iter()
        .enumerate()
        .map(|(slot, (pname, ty))| {
            let mut out = Vec::new();
            let mut offer = |e: &Expr| {
                if !e.contains_result() && !out.contains(e) && out.len() < SLOT_CHOICES {
                    out.push(e.clone());
                }
            };
            for (n, args) in &calls {
                if n == pred {
                    offer(&args[slot]);
                }
            }
            for (n, args) in &calls {
                let other = lookup(n).expect("typechecked call");
                if let Some(i) = other.params.iter().position(|(p, _)| p == pname) {
                    offer(&args[i]);
                }
            }
            let fallback = if *ty == Type::IntArray { &pool.arrays } else { &pool.int };
            for e in fallback {
                offer(e);
            }
            out
        })
        .collect()
}

fn cartesian(slots: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    slots.iter().fold(vec![Vec::new()], |acc, choices| {
        acc.iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c.clone());
                    v
                })
            })
            .collect()
    })
}

/// Maximal non-connective Boolean subformulas of `f`.
fn bool_atoms(f: &Formula, out: &mut Vec<Expr>) {
    match f {
        Expr::Binary(BinOp::And | BinOp::Or | BinOp::Implies, l, r) => {
            bool_atoms(l, out);
            bool_atoms(r, out);
        }
        Expr::Unary(UnOp::Not, x) => bool_atoms(x, out),
        Expr::Bool(_) => {}
        _ => push_new(out, f.clone()),
    }
}

/// Fill the Bool pool: every predicate of each referenced collection over
/// ranked arguments, negated and unnegated, plus the postcondition's own
/// Boolean atoms.
pub fn extract_predicates(mut pool: ExpressionPool, post: &[Formula]) -> ExpressionPool {
    let mut bools = Vec::new();
    for coll in &pool.collections {
        for p in collection(coll) {
            for args in cartesian(&ranked_args(p.name, post, &pool)) {
                let call = Expr::Call(p.name.to_string(), args);
                push_new(&mut bools, call.clone());
                push_new(&mut bools, Expr::not(call));
            }
        }
    }
    let mut atoms = Vec::new();
    for q in post {
        bool_atoms(q, &mut atoms);
    }
    for a in atoms.into_iter().filter(|a| !a.contains_result()) {
        push_new(&mut bools, a);
    }
    pool.bools = bools;
    pool
}

/// Replace each Int occurrence of `m`, one at a time, by `e`.
pub fn apply_substitution(m: &Formula, e: &Expr, env: &TypeEnv) -> Vec<Formula> {
    subexpressions(m, Type::Int, env)
        .into_iter()
        .map(|(p, _)| replace_at(m, &p, e.clone()))
        .collect()
}

/// `e + 1` and `e - 1` for each Int occurrence `e` of `m`.
pub fn apply_aging(m: &Formula, env: &TypeEnv) -> Vec<Formula> {
    let mut out = Vec::new();
    for (p, e) in subexpressions(m, Type::Int, env) {
        for op in [BinOp::Add, BinOp::Sub] {
            out.push(replace_at(m, &p, Expr::bin(op, e.clone(), Expr::Int(1))));
        }
    }
    out
}

/// `b ==> m` and `!b ==> m`.
pub fn apply_weakening(m: &Formula, b: &Formula) -> Vec<Formula> {
    vec![
        Expr::implies(b.clone(), m.clone()),
        Expr::implies(Expr::not(b.clone()), m.clone()),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveKind {
    /// Seeds are the postcondition clauses.
    Clause,
    /// Seeds are the predicate calls and quantified subformulas of the
    /// postcondition, negated and unnegated.
    Predicate,
    /// Seeds are the predicates of every collection the postcondition uses.
    Collection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Substitute(u8),
    Aging,
    Weakening,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wave {
    pub id: usize,
    pub kind: WaveKind,
    pub steps: Vec<Step>,
    /// Substitute from the restricted Int pool.
    pub restricted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveSchedule {
    pub waves: Vec<Wave>,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("cannot read wave schedule: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed wave schedule: {0}")]
    Json(#[from] serde_json::Error),
    #[error("wave {id}: {msg}")]
    Invalid { id: usize, msg: String },
}

const DEFAULT_SCHEDULE: &str = include_str!("../waves.json");

impl Default for WaveSchedule {
    fn default() -> Self {
        WaveSchedule::parse(DEFAULT_SCHEDULE).expect("built-in wave schedule")
    }
}

impl WaveSchedule {
    pub fn parse(text: &str) -> Result<WaveSchedule, ScheduleError> {
        let s: WaveSchedule = serde_json::from_str(text)?;
        for w in &s.waves {
            let bad = |msg: &str| ScheduleError::Invalid {
                id: w.id,
                msg: msg.into(),
            };
            if w.steps.len() > 3 {
                return Err(bad("at most three steps"));
            }
            if w.steps.iter().any(|s| matches!(s, Step::Substitute(k) if !(1..=3).contains(k))) {
                return Err(bad("substitution count must be 1 to 3"));
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<WaveSchedule, ScheduleError> {
        WaveSchedule::parse(&std::fs::read_to_string(path)?)
    }
}

fn as_text<S: serde::Serializer>(f: &Formula, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(f)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mutant {
    #[serde(serialize_with = "as_text")]
    pub formula: Formula,
    pub key: String,
    /// Key of the mutant this one was derived from; `None` for seeds.
    pub parent: Option<String>,
    pub op: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MutantSet {
    pub wave: usize,
    pub mutants: Vec<Mutant>,
    pub raw: usize,
    pub budget_exceeded: bool,
    /// Parent key and operator of every mutant the wave generated, including
    /// the dropped ones.
    #[serde(skip)]
    pub lineage: HashMap<String, (Option<String>, String)>,
}

impl MutantSet {
    /// The derivation chain of `key`, seed first.
    pub fn derivation(&self, key: &str) -> Vec<String> {
        let mut chain = Vec::new();
        let mut cur = Some(key.to_string());
        while let Some(k) = cur {
            let Some((parent, op)) = self.lineage.get(&k) else { break };
            chain.push(format!("{k} [{op}]"));
            cur = parent.clone();
        }
        chain.reverse();
        chain
    }
}

/// Quantified subformulas of `f`, outermost first.
fn quantified(f: &Formula, out: &mut Vec<Expr>) {
    if matches!(f, Expr::Quant { .. }) {
        out.push(f.clone());
        return;
    }
    for c in f.children() {
        quantified(c, out);
    }
}

fn seeds(kind: WaveKind, post: &[Formula], pool: &ExpressionPool) -> Vec<Formula> {
    let mut out = Vec::new();
    match kind {
        WaveKind::Clause => out.extend(post.iter().cloned()),
        WaveKind::Predicate => {
            let mut found = Vec::new();
            for q in post {
                let mut calls = Vec::new();
                calls_in(q, &mut calls);
                found.extend(calls.into_iter().map(|(n, a)| Expr::Call(n, a)));
                quantified(q, &mut found);
            }
            for f in found {
                push_new(&mut out, f.clone());
                push_new(&mut out, Expr::not(f));
            }
        }
        WaveKind::Collection => {
            for coll in &pool.collections {
                for p in collection(coll) {
                    let ranked = ranked_args(p.name, post, pool);
                    let mut args: Vec<Expr> = Vec::new();
                    for choices in ranked {
                        // prefer an argument not used yet in this call
                        let pick = choices
                            .iter()
                            .find(|c| !args.contains(c))
                            .or(choices.first())
                            .cloned();
                        args.extend(pick);
                    }
                    if args.len() == p.arity() {
                        let call = Expr::Call(p.name.to_string(), args);
                        push_new(&mut out, call.clone());
                        push_new(&mut out, Expr::not(call));
                    }
                }
            }
        }
    }
    out
}

/// Run one wave over `post`. Mutants still mentioning `\result` and those in
/// `memo` (generated by earlier waves) are left out of the result; every
/// returned key is added to `memo`.
pub fn run_wave(
    w: &Wave,
    post: &[Formula],
    pool: &ExpressionPool,
    env: &TypeEnv,
    memo: &mut HashSet<String>,
    cap: usize,
) -> MutantSet {
    let mut all: Vec<Mutant> = Vec::new();
    let mut in_wave: HashSet<String> = HashSet::new();
    let mut raw = 0usize;
    let mut exceeded = false;
    for s in seeds(w.kind, post, pool) {
        let f = normalize(&s);
        let k = key(&f);
        if in_wave.insert(k.clone()) {
            all.push(Mutant {
                formula: f,
                key: k,
                parent: None,
                op: "seed".into(),
            });
        }
    }
    let ints = if w.restricted { &pool.int_restricted } else { &pool.int };
    let mut ops: Vec<Step> = Vec::new();
    for s in &w.steps {
        match s {
            Step::Substitute(k) => ops.extend(std::iter::repeat_n(Step::Substitute(1), *k as usize)),
            other => ops.push(*other),
        }
    }
    'steps: for op in ops {
        let current = all.len();
        for i in 0..current {
            let m = all[i].formula.clone();
            let parent = all[i].key.clone();
            let produced: Vec<(Formula, String)> = match op {
                Step::Substitute(_) => ints
                    .iter()
                    .flat_map(|e| {
                        apply_substitution(&m, e, env)
                            .into_iter()
                            .map(move |f| (f, format!("sub {e}")))
                    })
                    .collect(),
                Step::Aging => apply_aging(&m, env)
                    .into_iter()
                    .map(|f| (f, "aging".to_string()))
                    .collect(),
                Step::Weakening => pool
                    .bools
                    .iter()
                    .flat_map(|b| {
                        apply_weakening(&m, b)
                            .into_iter()
                            .map(move |f| (f, format!("weaken {b}")))
                    })
                    .collect(),
            };
            for (f, how) in produced {
                raw += 1;
                if raw > cap {
                    exceeded = true;
                    break 'steps;
                }
                let f = normalize(&f);
                let k = key(&f);
                if in_wave.insert(k.clone()) {
                    all.push(Mutant {
                        formula: f,
                        key: k,
                        parent: Some(parent.clone()),
                        op: how,
                    });
                }
            }
        }
    }
    if exceeded {
        log::warn!("wave {}: more than {cap} raw mutants, cut short", w.id);
    }
    // keep ancestors for provenance, but return only fresh, loop-meaningful
    // mutants
    let lineage = all
        .iter()
        .map(|m| (m.key.clone(), (m.parent.clone(), m.op.clone())))
        .collect();
    let mut out = Vec::new();
    for m in all {
        if m.formula.contains_result() || matches!(m.formula, Expr::Bool(_)) {
            continue;
        }
        if memo.insert(m.key.clone()) {
            out.push(m);
        }
    }
    MutantSet {
        wave: w.id,
        mutants: out,
        raw,
        budget_exceeded: exceeded,
        lineage,
    }
}

/// Mutants that hold at every AtEntry/AtExit observation of `site`, checked
/// in batches of `batch_size`. The result does not depend on the batching.
pub fn dynamic_validate(
    mutants: &MutantSet,
    obs: &Observations,
    site: &LoopSite,
    batch_size: usize,
    strategy: Strategy,
) -> Vec<Candidate> {
    let cands: Vec<Candidate> = mutants
        .mutants
        .iter()
        .map(|m| Candidate::new(site.id, m.formula.clone(), Origin::Mutation { wave: mutants.wave }))
        .collect();
    let batches: Vec<&[Candidate]> = cands.chunks(batch_size.max(1)).collect();
    let kept = par_map(strategy, &batches, |batch| {
        batch
            .iter()
            .filter(|c| obs.survives(c))
            .cloned()
            .collect::<Vec<_>>()
    });
    let mut out: Vec<Candidate> = kept
        .into_iter()
        .flatten()
        .map(|c| c.with_status(Status::Surviving))
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

#[derive(Clone, Debug, Default)]
pub struct TautologyResult {
    pub kept: Vec<Candidate>,
    pub removed: Vec<Candidate>,
}

/// Goals per tautology query.
const TAUTOLOGY_CHUNK: usize = 128;

/// Drop each survivor that the prover derives from the `verified`
/// invariants of the same loop alone, over unconstrained variables. Unknown
/// verdicts and encoding failures keep the candidate.
pub fn eliminate_tautologies(
    survivors: Vec<Candidate>,
    verified: &[Candidate],
    prover: &Prover,
    env: &TypeEnv,
    strategy: Strategy,
) -> TautologyResult {
    let mut chunks: Vec<(Vec<Formula>, Vec<Candidate>)> = Vec::new();
    let mut by_loop: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
    for c in survivors {
        by_loop.entry(c.loop_id).or_default().push(c);
    }
    for (l, cs) in by_loop {
        let assumptions: Vec<Formula> = verified
            .iter()
            .filter(|v| v.loop_id == l)
            .map(|v| v.formula.clone())
            .collect();
        for part in cs.chunks(TAUTOLOGY_CHUNK) {
            chunks.push((assumptions.clone(), part.to_vec()));
        }
    }
    let verdicts = par_map(strategy, &chunks, |(assumptions, cs)| {
        let goals: Vec<Formula> = cs.iter().map(|c| c.formula.clone()).collect();
        prover.implied(&env.vars, assumptions, &goals)
    });
    let mut res = TautologyResult::default();
    for ((_, cs), v) in chunks.into_iter().zip(verdicts) {
        match v {
            Ok(verdicts) => {
                for (c, v) in cs.into_iter().zip(verdicts) {
                    match v {
                        Verdict::Valid => res.removed.push(c),
                        Verdict::Unknown { reason } => {
                            log::debug!("tautology check of `{}` inconclusive: {reason}", c.formula);
                            res.kept.push(c);
                        }
                        Verdict::Invalid { .. } => res.kept.push(c),
                    }
                }
            }
            Err(e) => {
                log::warn!("tautology check skipped: {e}");
                res.kept.extend(cs);
            }
        }
    }
    res
}

#[cfg(test)]
mod tests;
