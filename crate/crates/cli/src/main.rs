use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use forge::driver::{run_corpus, run_dynamate, CorpusConfig, RunConfig};
use forge::gindyn::WaveSchedule;
use forge::lang::{parse_program, typecheck, TypedProgram};
use forge::prover::{default_solver_path, SolverConfig};

#[derive(Parser)]
#[command(name = "forge", version, about = "Infer loop invariants and verify annotated programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer invariants for one program and try to prove it.
    Prove {
        file: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        /// Write the mutant derivation log to this file.
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Run every `.mlw` program of a directory over several seeds.
    Corpus {
        dir: PathBuf,
        /// Runs per program.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args)]
struct RunOpts {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test inputs per iteration.
    #[arg(long, default_value_t = 300)]
    budget: usize,
    #[arg(long, default_value_t = 20)]
    max_iterations: usize,
    /// SMT solver binary (default: $FORGE_SOLVER, else z3).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-query solver timeout in seconds.
    #[arg(long, default_value_t = 10)]
    vc_timeout: u64,
    /// Wave schedule (JSON) replacing the built-in one.
    #[arg(long)]
    waves: Option<PathBuf>,
    #[arg(long)]
    dump_tests: Option<PathBuf>,
    #[arg(long)]
    dump_vcs: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Raw mutants per wave before it is cut short.
    #[arg(long, default_value_t = forge::gindyn::DEFAULT_MUTANT_CAP)]
    max_mutants: usize,
}

impl RunOpts {
    fn config(&self) -> Result<RunConfig> {
        let schedule = match &self.waves {
            Some(p) => WaveSchedule::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => WaveSchedule::default(),
        };
        if self.vc_timeout == 0 {
            bail!("--vc-timeout must be positive");
        }
        let config = RunConfig {
            budget: self.budget,
            max_iterations: self.max_iterations,
            schedule,
            seed: self.seed,
            solver: SolverConfig {
                path: self.solver.clone().unwrap_or_else(default_solver_path),
                timeout: Duration::from_secs(self.vc_timeout),
                ..SolverConfig::default()
            },
            max_mutants: self.max_mutants,
            dump_tests: self.dump_tests.clone(),
            dump_vcs: self.dump_vcs.clone(),
            ..RunConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

fn load(path: &Path) -> Result<TypedProgram> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let program = parse_program(&text).with_context(|| format!("parsing {}", path.display()))?;
    match typecheck(&program) {
        Ok(p) => Ok(p),
        Err(errors) => {
            for e in &errors {
                eprintln!("{}: {e}", path.display());
            }
            bail!("{} type errors", errors.len())
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Prove {
            file,
            opts,
            provenance,
        } => {
            let program = load(&file)?;
            let mut config = opts.config()?;
            config.provenance_log = provenance;
            let report = run_dynamate(&program, &config)?;
            println!(
                "{}: {:?} after {} iterations ({})",
                report.program, report.outcome, report.iterations, report.reason
            );
            println!(
                "obligations: {}/{} program obligations discharged ({:.1}%)",
                report.obligations.program_discharged,
                report.obligations.program_total,
                report.obligations.percent
            );
            for inv in &report.proved {
                println!("  loop {}: {}", inv.loop_id, inv.formula);
            }
            if let Some(path) = &opts.report {
                write_json(path, &serde_json::to_value(&report)?)?;
            }
            Ok(report.success())
        }
        Command::Corpus { dir, seeds, opts } => {
            if seeds == 0 {
                bail!("--seeds must be positive");
            }
            let config = CorpusConfig {
                run: opts.config()?,
                seeds,
            };
            let report = run_corpus(&dir, &config).with_context(|| format!("reading {}", dir.display()))?;
            print!("{}", report.table());
            if let Some(path) = &opts.report {
                write_json(path, &serde_json::to_value(&report)?)?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
