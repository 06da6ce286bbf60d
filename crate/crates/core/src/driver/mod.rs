//! The inference loop: test generation, mining, Houdini and a proof attempt
//! per iteration, with mutation waves whenever mining stops making progress.

mod corpus;
mod report;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

pub use corpus::{run_corpus, CorpusConfig, CorpusReport, CorpusRow, COLUMNS};
pub use report::{
    strip_timings, GoldenMatch, Obligations, Outcome, Phase, PhaseEvent, ProvedInvariant,
    RunReport, Summary, TautologyEvent, Timings, WaveStats, SCHEMA_VERSION, TIMING_FIELDS,
};

use crate::candidate::{Candidate, Origin, Status};
use crate::exec::Strategy;
use crate::gindyn::{
    build_pools, dynamic_validate, eliminate_tautologies, extract_predicates, run_wave,
    WaveSchedule, DEFAULT_MUTANT_CAP,
};
use crate::interp::Layout;
use crate::lang::{Expr, Formula, TypedProgram};
use crate::prover::{HoudiniResult, ProofResult, Prover, SolverConfig};
use crate::templates::{filter_by_suite, instantiate_templates, Observations};
use crate::testgen::{falsify, generate_valid_inputs, TestSuite};

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Test inputs tried per iteration.
    pub budget: usize,
    pub max_iterations: usize,
    pub schedule: WaveSchedule,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Raw mutants per wave before it is cut short.
    pub max_mutants: usize,
    /// Mutants per dynamic-validation batch.
    pub batch_size: usize,
    pub strategy: Strategy,
    pub dump_tests: Option<PathBuf>,
    pub dump_vcs: Option<PathBuf>,
    /// File receiving one line per generated mutant with its derivation.
    pub provenance_log: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            budget: 300,
            max_iterations: 20,
            schedule: WaveSchedule::default(),
            seed: 0,
            solver: SolverConfig::default(),
            max_mutants: DEFAULT_MUTANT_CAP,
            batch_size: 512,
            strategy: Strategy::default(),
            dump_tests: None,
            dump_vcs: None,
            provenance_log: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("budget", self.budget),
            ("max iterations", self.max_iterations),
            ("mutant cap", self.max_mutants),
            ("batch size", self.batch_size),
        ] {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        Ok(())
    }
}

/// Normalized formulas per loop that some test has violated. Members are
/// never proposed again.
#[derive(Clone, Debug, Default)]
pub struct FalsifiedMemo {
    per_loop: BTreeMap<usize, HashSet<String>>,
}

impl FalsifiedMemo {
    pub fn insert(&mut self, c: &Candidate) -> bool {
        self.per_loop.entry(c.loop_id).or_default().insert(c.key.clone())
    }

    pub fn contains(&self, c: &Candidate) -> bool {
        self.per_loop.get(&c.loop_id).is_some_and(|s| s.contains(&c.key))
    }

    pub fn len(&self) -> usize {
        self.per_loop.values().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(iteration as u64)
}

/// Whether a template's constant comes only from observed values; those
/// shift as the suite grows and do not count toward progress.
fn drifting(c: &Candidate, literals: &BTreeSet<i64>) -> bool {
    fn lits(e: &Expr, out: &mut BTreeSet<i64>) {
        if let Expr::Int(n) = e {
            out.insert(*n);
        }
        for c in e.children() {
            lits(c, out);
        }
    }
    if c.origin != Origin::Template {
        return false;
    }
    let mut found = BTreeSet::new();
    lits(&c.formula, &mut found);
    found.iter().any(|n| !literals.contains(n) && *n != 0 && *n != 1)
}

struct Run<'a> {
    program: &'a TypedProgram,
    config: &'a RunConfig,
    prover: Prover,
    report: RunReport,
    suite: TestSuite,
    memo: FalsifiedMemo,
    /// Surviving mutants per loop.
    mutants: BTreeMap<usize, Vec<Candidate>>,
    /// Keys of every mutant generated so far, per loop.
    generated: BTreeMap<usize, HashSet<String>>,
    golden_keys: BTreeMap<usize, BTreeSet<String>>,
    next_wave: usize,
    provenance: Option<std::fs::File>,
    phase_start: Instant,
}

/// Infer invariants for `program` and try to prove it.
pub fn run_dynamate(program: &TypedProgram, config: &RunConfig) -> Result<RunReport, ConfigError> {
    config.validate()?;
    let started = Instant::now();
    let mut prover = Prover::new(config.solver.clone()).with_strategy(config.strategy);
    if let Some(d) = &config.dump_vcs {
        prover = prover.with_dump_dir(d);
    }
    let provenance = config.provenance_log.as_ref().and_then(|p| {
        std::fs::File::create(p)
            .map_err(|e| log::warn!("cannot create {}: {e}", p.display()))
            .ok()
    });
    let golden_keys = program
        .loops
        .iter()
        .map(|l| (l.id, l.golden.iter().map(crate::lang::key).collect()))
        .collect();
    let mut run = Run {
        program,
        config,
        prover,
        report: RunReport::new(&program.name, config.seed),
        suite: TestSuite::new(config.seed),
        memo: FalsifiedMemo::default(),
        mutants: BTreeMap::new(),
        generated: BTreeMap::new(),
        golden_keys,
        next_wave: 0,
        provenance,
        phase_start: Instant::now(),
    };
    run.go();
    run.report.timings.total_ms = started.elapsed().as_millis() as u64;
    run.report.timings.solver_queries = run.prover.queries();
    Ok(run.report)
}

impl Run<'_> {
    fn phase(&mut self, iteration: usize, phase: Phase) {
        self.report.phases.push(PhaseEvent { iteration, phase });
        self.phase_start = Instant::now();
    }

    fn phase_done(&mut self, phase: Phase) {
        let ms = self.phase_start.elapsed().as_millis() as u64;
        *self.report.timings.phases.entry(phase).or_default() += ms;
    }

    fn go(&mut self) {
        let literals = self.program.literals();
        let baseline = self.prover.prove_program(self.program, &BTreeMap::new());
        match baseline {
            Ok(r) => self.report.obligations.baseline_percent = r.percent(),
            Err(e) => return self.fail(0, format!("encoding error: {e}")),
        }
        let mut previous: Option<BTreeSet<(usize, String)>> = None;
        let mut unproved: Vec<Candidate> = Vec::new();
        let mut proved = HoudiniResult::default();
        for iteration in 1..=self.config.max_iterations {
            self.report.iterations = iteration;

            self.phase(iteration, Phase::Testgen);
            if let Err(msg) = self.testgen(iteration, &unproved) {
                self.phase_done(Phase::Testgen);
                return self.fail(iteration, msg);
            }
            self.phase_done(Phase::Testgen);

            self.phase(iteration, Phase::Mine);
            let obs = Observations::new(self.program, &self.suite);
            let mut surviving = self.mine(&obs);
            let signature = |s: &BTreeMap<usize, Vec<Candidate>>| -> BTreeSet<(usize, String)> {
                s.values()
                    .flatten()
                    .filter(|c| !drifting(c, &literals))
                    .map(|c| (c.loop_id, c.key.clone()))
                    .collect()
            };
            let mut sig = signature(&surviving);
            if previous.as_ref() == Some(&sig) {
                // mining is stuck: add waves until something new survives
                loop {
                    if self.next_wave >= self.config.schedule.waves.len() {
                        self.phase_done(Phase::Mine);
                        return self.finish_failure(iteration, "mutation waves exhausted", &proved);
                    }
                    self.wave(iteration, &obs, &proved);
                    surviving = self.mine(&obs);
                    sig = signature(&surviving);
                    if previous.as_ref() != Some(&sig) {
                        break;
                    }
                }
            }
            previous = Some(sig);
            self.phase_done(Phase::Mine);

            self.phase(iteration, Phase::Houdini);
            proved = self.prover.houdini(self.program, &surviving);
            self.phase_done(Phase::Houdini);
            let proved_keys: HashSet<(usize, &str)> = proved
                .proved
                .values()
                .flatten()
                .map(|c| (c.loop_id, c.key.as_str()))
                .collect();
            unproved = surviving
                .values()
                .flatten()
                .filter(|c| !proved_keys.contains(&(c.loop_id, c.key.as_str())))
                .map(|c| c.clone().with_status(Status::Unproved))
                .collect();

            self.phase(iteration, Phase::Prove);
            let result = self.prover.prove_program(self.program, &proved.formulas());
            self.phase_done(Phase::Prove);
            let result = match result {
                Ok(r) => r,
                Err(e) => return self.fail(iteration, format!("encoding error: {e}")),
            };
            log::info!(
                "{} iteration {iteration}: {} candidates, {} proved, {:.1}% discharged",
                self.program.name,
                surviving.values().map(Vec::len).sum::<usize>(),
                proved.proved.values().map(Vec::len).sum::<usize>(),
                result.percent()
            );
            self.record(&proved, &unproved, &result);
            if result.full_proof {
                self.report.outcome = Outcome::Success;
                self.report.reason = "full proof".into();
                return self.match_golden(&proved);
            }
        }
        self.report.reason = "iteration limit reached".into();
        self.match_golden(&proved);
    }

    fn fail(&mut self, iteration: usize, reason: String) {
        log::warn!("{}: {reason}", self.program.name);
        self.report.iterations = iteration;
        self.report.outcome = Outcome::Failure;
        self.report.reason = reason;
    }

    fn finish_failure(&mut self, iteration: usize, reason: &str, proved: &HoudiniResult) {
        self.report.iterations = iteration;
        self.report.outcome = Outcome::Failure;
        self.report.reason = reason.into();
        self.match_golden(proved);
    }

    fn testgen(&mut self, iteration: usize, unproved: &[Candidate]) -> Result<(), String> {
        let seed = iteration_seed(self.config.seed, iteration);
        if iteration == 1 {
            self.suite = generate_valid_inputs(self.program, self.config.budget, seed)
                .map_err(|e| format!("test generation failed: {e}"))?;
        } else {
            let (hits, fresh) = falsify(self.program, unproved, self.config.budget, seed);
            for h in hits.iter().filter(|h| h.hit) {
                if self.memo.insert(&h.candidate) && self.is_golden(&h.candidate) {
                    self.report.golden_filtered.insert(h.candidate.to_string());
                }
            }
            self.suite.merge(&fresh);
        }
        if let Some(dir) = &self.config.dump_tests {
            let layout = Layout::of_program(self.program);
            let write = std::fs::create_dir_all(dir).and_then(|_| {
                let text = serde_json::to_string_pretty(&self.suite.to_json(&layout))
                    .expect("suite serializes");
                std::fs::write(dir.join(format!("tests_{iteration:02}.json")), text)
            });
            if let Err(e) = write {
                log::warn!("cannot dump tests to {}: {e}", dir.display());
            }
        }
        Ok(())
    }

    fn is_golden(&self, c: &Candidate) -> bool {
        self.golden_keys.get(&c.loop_id).is_some_and(|g| g.contains(&c.key))
    }

    /// Template and mutant candidates that survive the current suite and
    /// are not memoized as falsified.
    fn mine(&mut self, obs: &Observations) -> BTreeMap<usize, Vec<Candidate>> {
        let mut out: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
        let mut fresh = Vec::new();
        for site in &self.program.loops {
            fresh.extend(instantiate_templates(self.program, site, obs));
        }
        let mut pool: Vec<Candidate> = fresh;
        for cs in self.mutants.values() {
            pool.extend(cs.iter().cloned());
        }
        pool.retain(|c| !self.memo.contains(c));
        let before: Vec<Candidate> = pool.clone();
        let kept = filter_by_suite(pool, obs, self.config.strategy);
        let kept_keys: HashSet<(usize, &str)> =
            kept.iter().map(|c| (c.loop_id, c.key.as_str())).collect();
        for c in &before {
            if !kept_keys.contains(&(c.loop_id, c.key.as_str())) && self.is_golden(c) {
                self.report.golden_filtered.insert(c.to_string());
            }
        }
        drop(kept_keys);
        let mut seen: HashSet<(usize, String)> = HashSet::new();
        for c in kept {
            if seen.insert((c.loop_id, c.key.clone())) {
                out.entry(c.loop_id).or_default().push(c);
            }
        }
        // mutants the suite has since refuted are dropped for good
        for (l, cs) in self.mutants.iter_mut() {
            cs.retain(|c| seen.contains(&(*l, c.key.clone())));
        }
        out
    }

    /// Generate, validate and prune the next wave's mutants at every loop.
    fn wave(&mut self, iteration: usize, obs: &Observations, proved: &HoudiniResult) {
        let w = self.config.schedule.waves[self.next_wave].clone();
        self.next_wave += 1;
        let env = self.program.env();
        let verified: Vec<Candidate> = proved.proved.values().flatten().cloned().collect();
        let mut stats = WaveStats {
            id: w.id,
            iteration,
            ..WaveStats::default()
        };
        for site in &self.program.loops {
            let pool = extract_predicates(build_pools(self.program, site, &self.program.post), &self.program.post);
            let memo = self.generated.entry(site.id).or_default();
            let set = run_wave(&w, &self.program.post, &pool, env, memo, self.config.max_mutants);
            stats.raw += set.raw;
            stats.mutants += set.mutants.len();
            stats.budget_exceeded |= set.budget_exceeded;
            if let Some(f) = self.provenance.as_mut() {
                for m in &set.mutants {
                    let chain = set.derivation(&m.key).join(" <- ");
                    let _ = writeln!(f, "wave {} loop {}: {} | {}", w.id, site.id, m.key, chain);
                }
            }
            let survivors =
                dynamic_validate(&set, obs, site, self.config.batch_size, self.config.strategy);
            let kept: HashSet<&str> = survivors.iter().map(|c| c.key.as_str()).collect();
            let golden = self.golden_keys.get(&site.id);
            for m in &set.mutants {
                if !kept.contains(m.key.as_str()) && golden.is_some_and(|g| g.contains(&m.key)) {
                    self.report
                        .golden_filtered
                        .insert(format!("loop {}: {}", site.id, m.formula));
                }
            }
            stats.survivors += survivors.len();
            let local: Vec<Candidate> = verified.iter().filter(|c| c.loop_id == site.id).cloned().collect();
            let t = eliminate_tautologies(survivors, &local, &self.prover, env, self.config.strategy);
            stats.tautologies += t.removed.len();
            if !t.removed.is_empty() {
                self.report.tautology_events.push(TautologyEvent {
                    loop_id: site.id,
                    verified: local.iter().map(|c| c.formula.clone()).collect(),
                    removed: t.removed.iter().map(|c| c.formula.clone()).collect(),
                });
            }
            let entry = self.mutants.entry(site.id).or_default();
            entry.extend(t.kept);
            entry.sort_by(|a, b| a.key.cmp(&b.key));
            entry.dedup_by(|a, b| a.key == b.key);
        }
        log::info!(
            "{} wave {}: {} mutants, {} survive tests, {} tautologies",
            self.program.name,
            w.id,
            stats.mutants,
            stats.survivors,
            stats.tautologies
        );
        if stats.budget_exceeded {
            log::warn!("wave {} exceeded the mutant cap", w.id);
        }
        self.report.waves.push(stats);
    }

    fn record(&mut self, proved: &HoudiniResult, unproved: &[Candidate], result: &ProofResult) {
        self.report.proved = proved
            .proved
            .values()
            .flatten()
            .map(|c| ProvedInvariant {
                loop_id: c.loop_id,
                formula: c.formula.to_string(),
                origin: c.origin,
            })
            .collect();
        self.report.unproved = unproved.iter().map(|c| c.to_string()).collect();
        let o = &mut self.report.obligations;
        o.discharged = result.discharged;
        o.total = result.total;
        o.program_discharged = result.program_discharged;
        o.program_total = result.program_total;
        o.percent = result.percent();
        o.failed = result
            .obligations
            .iter()
            .filter(|ob| !ob.verdict.is_valid())
            .map(|ob| ob.kind.slug())
            .collect();
        self.report.summarize(self.memo.len());
    }

    /// Which golden invariants have a logically equivalent proved invariant
    /// at the same loop.
    fn match_golden(&mut self, proved: &HoudiniResult) {
        let types = &self.program.env().vars;
        let mut out = Vec::new();
        for site in &self.program.loops {
            let mine: Vec<Formula> = proved
                .proved
                .get(&site.id)
                .map(|cs| cs.iter().map(|c| c.formula.clone()).collect())
                .unwrap_or_default();
            for g in &site.golden {
                let k = crate::lang::key(g);
                let matched = mine.iter().any(|m| crate::lang::key(m) == k)
                    || self.prover.equivalences(types, g, &mine).into_iter().any(|b| b);
                out.push(GoldenMatch {
                    loop_id: site.id,
                    formula: g.to_string(),
                    matched,
                });
            }
        }
        self.report.golden = out;
        self.report.summarize(self.memo.len());
    }
}
