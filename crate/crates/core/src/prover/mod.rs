//! Modular verifier: VC generation, solver dispatch, Houdini and full-program
//! proof attempts.

mod encode;
mod solver;
mod vcgen;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

pub use encode::{EncodingError, SVal, Scope, State};
pub use solver::{default_solver_path, SolverConfig, Verdict, DEFAULT_RLIMIT};
pub use vcgen::{free_scope, generate_vcs, Vc, VcKind, VcSet};

use crate::candidate::{Candidate, Status};
use crate::exec::{par_map, Strategy};
use crate::lang::{Formula, Ident, Type, TypedProgram};
use solver::Solver;

#[derive(Clone, Debug, Serialize)]
pub struct Obligation {
    pub id: usize,
    #[serde(flatten)]
    pub kind: VcKind,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProofResult {
    pub obligations: Vec<Obligation>,
    pub discharged: usize,
    pub total: usize,
    /// Counts restricted to postcondition and safety obligations.
    pub program_discharged: usize,
    pub program_total: usize,
    pub full_proof: bool,
}

impl ProofResult {
    /// Percentage of program obligations discharged; 100 when there are none.
    pub fn percent(&self) -> f64 {
        if self.program_total == 0 {
            100.0
        } else {
            100.0 * self.program_discharged as f64 / self.program_total as f64
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct HoudiniResult {
    pub proved: BTreeMap<usize, Vec<Candidate>>,
    pub rejected: Vec<Candidate>,
    pub rounds: usize,
}

impl HoudiniResult {
    pub fn formulas(&self) -> BTreeMap<usize, Vec<Formula>> {
        self.proved
            .iter()
            .map(|(l, cs)| (*l, cs.iter().map(|c| c.formula.clone()).collect()))
            .collect()
    }
}

pub struct Prover {
    solver: Solver,
    strategy: Strategy,
    dump_dir: Option<PathBuf>,
    dumps: AtomicUsize,
}

impl Prover {
    pub fn new(config: SolverConfig) -> Prover {
        Prover {
            solver: Solver::new(config),
            strategy: Strategy::default(),
            dump_dir: None,
            dumps: AtomicUsize::new(0),
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Prover {
        self.strategy = strategy;
        self
    }

    /// Write every obligation script checked from now on into `dir`.
    pub fn with_dump_dir(mut self, dir: impl Into<PathBuf>) -> Prover {
        self.dump_dir = Some(dir.into());
        self
    }

    pub fn available(&self) -> bool {
        self.solver.available()
    }

    pub fn queries(&self) -> usize {
        self.solver.queries()
    }

    fn dump(&self, set: &VcSet, vcs: &[&Vc], tag: &str) {
        let Some(dir) = &self.dump_dir else { return };
        let batch = self.dumps.fetch_add(1, Ordering::Relaxed);
        if let Err(e) = std::fs::create_dir_all(dir) {
            log::warn!("cannot create {}: {e}", dir.display());
            return;
        }
        for vc in vcs {
            let name = format!("{tag}_{batch:04}_{:03}_{}.smt2", vc.id, vc.kind.slug());
            if let Err(e) = std::fs::write(dir.join(name), set.script(vc)) {
                log::warn!("cannot dump obligation: {e}");
            }
        }
    }

    /// Check the selected obligations of `set`; verdicts by obligation id.
    pub fn check(&self, set: &VcSet, pick: impl Fn(&Vc) -> bool, tag: &str) -> BTreeMap<usize, Verdict> {
        let groups = set.groups(pick);
        let all: Vec<&Vc> = groups.iter().flatten().copied().collect();
        self.dump(set, &all, tag);
        let results = par_map(self.strategy, &groups, |g| {
            let ctx = set.context(g[0].facts, &g[0].path);
            let goals: Vec<String> = g.iter().map(|v| v.goal.clone()).collect();
            g.iter()
                .map(|v| v.id)
                .zip(self.solver.check_group(&ctx, &goals))
                .collect::<Vec<_>>()
        });
        results.into_iter().flatten().collect()
    }

    /// Greatest inductive subset of `candidates`: annotate every loop with all
    /// remaining candidates and drop each one whose initiation or
    /// preservation check is not Valid, until nothing changes.
    pub fn houdini(
        &self,
        program: &TypedProgram,
        candidates: &BTreeMap<usize, Vec<Candidate>>,
    ) -> HoudiniResult {
        let mut rejected = Vec::new();
        // canonical order, so the queries do not depend on the input order
        let mut current: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
        for (l, cs) in candidates {
            let mut seen = BTreeSet::new();
            let mut v: Vec<Candidate> = Vec::new();
            for c in cs {
                if !seen.insert(c.key.clone()) {
                    continue;
                }
                let single: BTreeMap<usize, Vec<Formula>> =
                    [(*l, vec![c.formula.clone()])].into_iter().collect();
                if let Err(e) = generate_vcs(program, &single) {
                    log::warn!("dropping candidate `{}`: {e}", c.formula);
                    rejected.push(c.clone().with_status(Status::Unproved));
                    continue;
                }
                v.push(c.clone());
            }
            v.sort_by(|a, b| a.key.cmp(&b.key));
            current.insert(*l, v);
        }
        let mut rounds = 0;
        loop {
            if current.values().all(Vec::is_empty) {
                break;
            }
            rounds += 1;
            let invs: BTreeMap<usize, Vec<Formula>> = current
                .iter()
                .map(|(l, cs)| (*l, cs.iter().map(|c| c.formula.clone()).collect()))
                .collect();
            let set = generate_vcs(program, &invs).expect("candidates encode individually");
            let verdicts = self.check(&set, |v| !v.kind.is_program_obligation(), "houdini");
            let mut failed: BTreeSet<(usize, usize)> = BTreeSet::new();
            for vc in &set.vcs {
                if let VcKind::Initiation { loop_id, index } | VcKind::Preservation { loop_id, index } =
                    vc.kind
                {
                    match &verdicts[&vc.id] {
                        Verdict::Valid => {}
                        Verdict::Unknown { reason } => {
                            log::debug!("houdini: {} inconclusive ({reason})", vc.kind.slug());
                            failed.insert((loop_id, index));
                        }
                        Verdict::Invalid { .. } => {
                            failed.insert((loop_id, index));
                        }
                    }
                }
            }
            log::debug!("houdini round {rounds}: {} removed", failed.len());
            if failed.is_empty() {
                break;
            }
            for (l, cs) in current.iter_mut() {
                let mut keep = Vec::new();
                for (i, c) in cs.drain(..).enumerate() {
                    if failed.contains(&(*l, i)) {
                        rejected.push(c.with_status(Status::Unproved));
                    } else {
                        keep.push(c);
                    }
                }
                *cs = keep;
            }
        }
        let proved = current
            .into_iter()
            .filter(|(_, cs)| !cs.is_empty())
            .map(|(l, cs)| {
                (l, cs.into_iter().map(|c| c.with_status(Status::Proved)).collect())
            })
            .collect();
        HoudiniResult {
            proved,
            rejected,
            rounds,
        }
    }

    /// Check every obligation of `program` annotated with `invariants`.
    pub fn prove_program(
        &self,
        program: &TypedProgram,
        invariants: &BTreeMap<usize, Vec<Formula>>,
    ) -> Result<ProofResult, EncodingError> {
        let set = generate_vcs(program, invariants)?;
        let verdicts = self.check(&set, |_| true, "prove");
        let obligations: Vec<Obligation> = set
            .vcs
            .iter()
            .map(|vc| Obligation {
                id: vc.id,
                kind: vc.kind.clone(),
                verdict: verdicts[&vc.id].clone(),
            })
            .collect();
        let count = |prog_only: bool| {
            let of = obligations
                .iter()
                .filter(|o| !prog_only || o.kind.is_program_obligation());
            let all: Vec<_> = of.collect();
            (all.iter().filter(|o| o.verdict.is_valid()).count(), all.len())
        };
        let (discharged, total) = count(false);
        let (program_discharged, program_total) = count(true);
        Ok(ProofResult {
            full_proof: discharged == total,
            obligations,
            discharged,
            total,
            program_discharged,
            program_total,
        })
    }

    /// For each goal, whether it follows from `assumptions` alone, with all
    /// variables (and their entry values) unconstrained.
    pub fn implied(
        &self,
        types: &BTreeMap<Ident, Type>,
        assumptions: &[Formula],
        goals: &[Formula],
    ) -> Result<Vec<Verdict>, EncodingError> {
        let (ctx, cur, old) = free_context(types, assumptions)?;
        let scope = Scope {
            types,
            cur: &cur,
            old: &old,
            result: None,
        };
        let goals = goals
            .iter()
            .map(|g| scope.encode(g).map(|e| e.holds()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.solver.check_group(&ctx, &goals))
    }

    /// Whether `f` and `g` hold in exactly the same states.
    pub fn equivalent(&self, types: &BTreeMap<Ident, Type>, f: &Formula, g: &Formula) -> bool {
        self.equivalences(types, f, std::slice::from_ref(g))[0]
    }

    /// For each of `others`, whether it holds in exactly the states where
    /// `f` does. Formulas that fail to encode are never equivalent.
    pub fn equivalences(
        &self,
        types: &BTreeMap<Ident, Type>,
        f: &Formula,
        others: &[Formula],
    ) -> Vec<bool> {
        let mut out = vec![false; others.len()];
        let Ok((ctx, cur, old)) = free_context(types, &[]) else {
            return out;
        };
        let scope = Scope {
            types,
            cur: &cur,
            old: &old,
            result: None,
        };
        let Ok(f) = scope.encode(f) else { return out };
        let mut idx = Vec::new();
        let mut goals = Vec::new();
        for (i, g) in others.iter().enumerate() {
            if let Ok(g) = scope.encode(g) {
                idx.push(i);
                goals.push(format!("(= {} {})", f.holds(), g.holds()));
            }
        }
        for (i, v) in idx.into_iter().zip(self.solver.check_group(&ctx, &goals)) {
            out[i] = v.is_valid();
        }
        out
    }
}

fn free_context(
    types: &BTreeMap<Ident, Type>,
    assumptions: &[Formula],
) -> Result<(String, State, State), EncodingError> {
    let (decls, facts, cur, old) = free_scope(types);
    let mut ctx = String::from(encode::PRELUDE);
    for (n, s) in &decls {
        let _ = writeln!(ctx, "(declare-const {n} {s})");
    }
    for f in &facts {
        let _ = writeln!(ctx, "(assert {f})");
    }
    let scope = Scope {
        types,
        cur: &cur,
        old: &old,
        result: None,
    };
    for a in assumptions {
        let _ = writeln!(ctx, "(assert {})", scope.encode(a)?.holds());
    }
    Ok((ctx, cur, old))
}

/// Write one script per obligation into `dir`.
pub fn dump_vcs(set: &VcSet, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for vc in &set.vcs {
        std::fs::write(dir.join(format!("{:03}_{}.smt2", vc.id, vc.kind.slug())), set.script(vc))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
