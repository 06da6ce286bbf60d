use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::report::{percent, strip_timings, SCHEMA_VERSION};
use super::{run_dynamate, RunConfig, RunReport};
use crate::exec::par_map;
use crate::lang::{parse_program, typecheck};

#[derive(Clone, Debug)]
pub struct CorpusConfig {
    pub run: RunConfig,
    /// Runs per program, with seeds `run.seed`, `run.seed + 1`, ...
    pub seeds: usize,
}

/// Aggregates over the runs of one program.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorpusRow {
    pub program: String,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub proved_percent: f64,
    pub iterations: f64,
    pub invariants: f64,
    /// Percentage of proved invariants that came from mutation.
    pub mutation_share: f64,
    pub waves: f64,
    pub candidates: f64,
    pub falsified_percent: f64,
    pub tautology_percent: f64,
    pub golden_total: usize,
    pub golden_matched: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CorpusReport {
    pub schema_version: u32,
    pub seeds: usize,
    /// Set when the directory held no programs.
    pub empty: bool,
    pub rows: Vec<CorpusRow>,
    pub mean_proved_percent: f64,
    pub programs_with_full_proof: usize,
    pub runs: Vec<RunReport>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn row(program: &str, runs: &[&RunReport]) -> CorpusRow {
    let m = |f: &dyn Fn(&RunReport) -> f64| mean(runs.iter().map(|r| f(r)));
    let successes = runs.iter().filter(|r| r.success()).count();
    let invariants: usize = runs.iter().map(|r| r.summary.invariants).sum();
    let mutation: usize = runs.iter().map(|r| r.summary.mutation_invariants).sum();
    CorpusRow {
        program: program.to_string(),
        runs: runs.len(),
        successes,
        success_rate: percent(successes, runs.len()),
        proved_percent: m(&|r| r.obligations.percent),
        iterations: m(&|r| r.iterations as f64),
        invariants: m(&|r| r.summary.invariants as f64),
        mutation_share: percent(mutation, invariants),
        waves: m(&|r| r.summary.waves as f64),
        candidates: m(&|r| r.summary.candidates as f64),
        falsified_percent: m(&|r| r.summary.falsified_percent),
        tautology_percent: m(&|r| r.summary.tautology_percent),
        golden_total: runs.first().map_or(0, |r| r.golden.len()),
        golden_matched: m(&|r| r.golden_matched() as f64),
        error: None,
    }
}

/// `.mlw` files directly inside `dir`, by name.
pub fn corpus_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "mlw"))
        .collect();
    files.sort();
    Ok(files)
}

/// Run every program of `dir` once per seed. Programs that fail to load get
/// a row with an error and no runs.
pub fn run_corpus(dir: &Path, config: &CorpusConfig) -> std::io::Result<CorpusReport> {
    let files = corpus_files(dir)?;
    let mut loaded = Vec::new();
    let mut rows = Vec::new();
    for f in &files {
        let name = f.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let text = std::fs::read_to_string(f)?;
        let program = parse_program(&text)
            .map_err(|e| e.to_string())
            .and_then(|p| {
                typecheck(&p).map_err(|es| {
                    es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
                })
            });
        match program {
            Ok(p) => loaded.push((name, p)),
            Err(e) => rows.push(CorpusRow {
                program: name,
                error: Some(e),
                ..CorpusRow::default()
            }),
        }
    }
    let jobs: Vec<(usize, u64)> = (0..loaded.len())
        .flat_map(|i| (0..config.seeds).map(move |k| (i, config.run.seed + k as u64)))
        .collect();
    let runs: Vec<(usize, RunReport)> = par_map(config.run.strategy, &jobs, |(i, seed)| {
        let cfg = RunConfig {
            seed: *seed,
            ..config.run.clone()
        };
        let report = run_dynamate(&loaded[*i].1, &cfg).unwrap_or_else(|e| {
            let mut r = RunReport::new(&loaded[*i].0, *seed);
            r.reason = e.to_string();
            r
        });
        (*i, report)
    });
    for (i, (name, _)) in loaded.iter().enumerate() {
        let mine: Vec<&RunReport> = runs.iter().filter(|(j, _)| *j == i).map(|(_, r)| r).collect();
        rows.push(row(name, &mine));
    }
    rows.sort_by(|a, b| a.program.cmp(&b.program));
    let ran: Vec<&CorpusRow> = rows.iter().filter(|r| r.runs > 0).collect();
    Ok(CorpusReport {
        schema_version: SCHEMA_VERSION,
        seeds: config.seeds,
        empty: rows.is_empty(),
        mean_proved_percent: mean(ran.iter().map(|r| r.proved_percent)),
        programs_with_full_proof: ran.iter().filter(|r| r.successes > 0).count(),
        rows,
        runs: runs.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Column headers of the text table.
pub const COLUMNS: &[&str] = &[
    "program", "success%", "proved%", "iter", "inv", "mut%", "waves", "cand", "fals%", "taut%",
];

impl CorpusReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16}{:>9}{:>9}{:>7}{:>6}{:>7}{:>7}{:>9}{:>7}{:>7}",
            COLUMNS[0], COLUMNS[1], COLUMNS[2], COLUMNS[3], COLUMNS[4], COLUMNS[5], COLUMNS[6],
            COLUMNS[7], COLUMNS[8], COLUMNS[9]
        );
        if self.empty {
            let _ = writeln!(s, "(no programs)");
            return s;
        }
        for r in &self.rows {
            if let Some(e) = &r.error {
                let _ = writeln!(s, "{:<16} error: {e}", r.program);
                continue;
            }
            let _ = writeln!(
                s,
                "{:<16}{:>9.0}{:>9.1}{:>7.1}{:>6.1}{:>7.0}{:>7.1}{:>9.0}{:>7.1}{:>7.1}",
                r.program,
                r.success_rate,
                r.proved_percent,
                r.iterations,
                r.invariants,
                r.mutation_share,
                r.waves,
                r.candidates,
                r.falsified_percent,
                r.tautology_percent
            );
        }
        let _ = writeln!(
            s,
            "mean proved {:.1}%, {} of {} programs fully proved at least once",
            self.mean_proved_percent,
            self.programs_with_full_proof,
            self.rows.len()
        );
        s
    }

    /// The report as JSON without per-run timing fields.
    pub fn stable_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(runs) = v.get_mut("runs").and_then(|r| r.as_array_mut()) {
            for r in runs.iter_mut() {
                *r = strip_timings(r.take());
            }
        }
        v
    }
}
