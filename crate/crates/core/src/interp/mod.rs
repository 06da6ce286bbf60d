//! Deterministic interpreter with loop probes, and runtime formula evaluation.

mod eval;
mod run;
mod value;

use std::collections::HashSet;
use std::sync::Arc;

pub use eval::{compile, CExpr, CompileError, Ctx, DefinednessError, Fault};
pub use run::{
    Branch, Interpreter, Outcome, ProbeEvent, ProbeKind, Trace, DEFAULT_STEP_LIMIT,
};
pub use value::{Env, Layout, Value};

use crate::candidate::Candidate;
use crate::lang::{Formula, TypedProgram};

/// Run `program` on `input` (parameters only; locals start at their defaults).
pub fn run(program: &TypedProgram, input: &Env, step_limit: u64) -> Trace {
    Interpreter::new(program).run(input, step_limit)
}

/// Evaluate `f` in a named environment. `\old(v)` falls back to the current
/// value of `v` when `env.old` has no entry for it.
pub fn eval_formula(f: &Formula, env: &Env) -> Result<bool, DefinednessError> {
    let layout = Layout {
        names: env.vars.keys().cloned().collect(),
        types: Vec::new(),
        result: None,
        params: env.vars.len(),
    };
    let c = compile(f, &layout).map_err(|e| Fault::Unbound(e.0))?;
    let cur: Vec<Value> = env.vars.values().cloned().collect();
    let old: Vec<Value> = env
        .vars
        .iter()
        .map(|(n, v)| env.old.get(n).unwrap_or(v).clone())
        .collect();
    Ctx {
        cur: &cur,
        old: &old,
        result: env.result.as_ref(),
    }
    .eval_bool(&c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Survives,
    /// Index into `trace.events` of the first violating snapshot.
    Violated(usize),
}

/// Check each candidate independently at the AtEntry/AtExit snapshots of its
/// loop. Undefinedness counts as a violation.
pub fn check_candidates_on_trace(
    interp: &Interpreter,
    candidates: &[Candidate],
    trace: &Trace,
) -> Vec<Verdict> {
    candidates
        .iter()
        .map(|c| {
            let Ok(code) = compile(&c.formula, interp.layout()) else {
                return Verdict::Violated(0);
            };
            for (i, ev) in trace.events.iter().enumerate() {
                if ev.loop_id != c.loop_id
                    || !matches!(ev.kind, ProbeKind::AtEntry | ProbeKind::AtExit)
                {
                    continue;
                }
                let ctx = Ctx {
                    cur: &ev.state,
                    old: &trace.input,
                    result: None,
                };
                if ctx.eval_bool(&code) != Ok(true) {
                    return Verdict::Violated(i);
                }
            }
            Verdict::Survives
        })
        .collect()
}

/// One distinct loop-head observation: the state and its entry snapshot.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sample {
    pub old: Arc<Vec<Value>>,
    pub cur: Vec<Value>,
}

/// Distinct AtEntry/AtExit observations of `loop_id` across `traces`, in
/// first-seen order. Checking a candidate against these is equivalent to
/// checking it against every trace.
pub fn loop_samples<'a>(traces: impl IntoIterator<Item = &'a Trace>, loop_id: usize) -> Vec<Sample> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in traces {
        if !t.is_normal() {
            continue;
        }
        let old = Arc::new(t.input.clone());
        for ev in &t.events {
            if ev.loop_id == loop_id && matches!(ev.kind, ProbeKind::AtEntry | ProbeKind::AtExit) {
                let s = Sample {
                    old: old.clone(),
                    cur: ev.state.clone(),
                };
                if seen.insert(s.clone()) {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Index of the first sample on which `code` is false or undefined.
pub fn first_violation(code: &CExpr, samples: &[Sample]) -> Option<usize> {
    samples.iter().position(|s| {
        Ctx {
            cur: &s.cur,
            old: &s.old,
            result: None,
        }
        .eval_bool(code)
            != Ok(true)
    })
}
