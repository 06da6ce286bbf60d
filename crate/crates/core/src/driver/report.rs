use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::candidate::Origin;
use crate::lang::Formula;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Top-level report fields that vary between otherwise identical runs.
pub const TIMING_FIELDS: &[&str] = &["timings"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    #[default]
    Failure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Testgen,
    Mine,
    Houdini,
    Prove,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseEvent {
    pub iteration: usize,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProvedInvariant {
    pub loop_id: usize,
    pub formula: String,
    pub origin: Origin,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Obligations {
    pub discharged: usize,
    pub total: usize,
    /// Postcondition and safety obligations only.
    pub program_discharged: usize,
    pub program_total: usize,
    pub percent: f64,
    /// Percentage discharged with no loop invariants at all.
    pub baseline_percent: f64,
    pub failed: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WaveStats {
    pub id: usize,
    pub iteration: usize,
    /// Operator outputs before deduplication.
    pub raw: usize,
    /// Distinct new mutants.
    pub mutants: usize,
    pub survivors: usize,
    pub tautologies: usize,
    pub budget_exceeded: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub invariants: usize,
    pub mutation_invariants: usize,
    pub waves: usize,
    pub candidates: usize,
    pub falsified_percent: f64,
    pub tautology_percent: f64,
    pub falsified_by_tests: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoldenMatch {
    pub loop_id: usize,
    pub formula: String,
    pub matched: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Timings {
    pub total_ms: u64,
    pub phases: BTreeMap<Phase, u64>,
    pub solver_queries: usize,
}

/// Mutants dropped as consequences of the verified invariants of a loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TautologyEvent {
    pub loop_id: usize,
    pub verified: Vec<Formula>,
    pub removed: Vec<Formula>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub program: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub reason: String,
    pub iterations: usize,
    pub proved: Vec<ProvedInvariant>,
    pub unproved: Vec<String>,
    pub obligations: Obligations,
    pub summary: Summary,
    pub waves: Vec<WaveStats>,
    pub golden: Vec<GoldenMatch>,
    /// Golden invariants some test run refuted; always empty for sound
    /// golden annotations.
    pub golden_filtered: BTreeSet<String>,
    pub phases: Vec<PhaseEvent>,
    pub timings: Timings,
    #[serde(skip)]
    pub tautology_events: Vec<TautologyEvent>,
}

impl RunReport {
    pub fn new(program: &str, seed: u64) -> RunReport {
        RunReport {
            schema_version: SCHEMA_VERSION,
            program: program.to_string(),
            seed,
            ..RunReport::default()
        }
    }

    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    pub fn golden_matched(&self) -> usize {
        self.golden.iter().filter(|g| g.matched).count()
    }

    pub(crate) fn summarize(&mut self, falsified_by_tests: usize) {
        let s = &mut self.summary;
        s.invariants = self.proved.len();
        s.mutation_invariants = self
            .proved
            .iter()
            .filter(|p| matches!(p.origin, Origin::Mutation { .. }))
            .count();
        s.waves = self.waves.len();
        s.candidates = self.waves.iter().map(|w| w.mutants).sum();
        let survivors: usize = self.waves.iter().map(|w| w.survivors).sum();
        let tautologies: usize = self.waves.iter().map(|w| w.tautologies).sum();
        s.falsified_percent = percent(s.candidates - survivors, s.candidates);
        s.tautology_percent = percent(tautologies, survivors);
        s.falsified_by_tests = falsified_by_tests;
    }

    /// The report as JSON without the timing fields.
    pub fn stable_json(&self) -> serde_json::Value {
        strip_timings(serde_json::to_value(self).expect("report serializes"))
    }
}

pub(crate) fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Remove [`TIMING_FIELDS`] from a serialized report.
pub fn strip_timings(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(o) = v.as_object_mut() {
        for f in TIMING_FIELDS {
            o.remove(*f);
        }
    }
    v
}
