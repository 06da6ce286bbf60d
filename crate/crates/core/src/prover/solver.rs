//! SMT-LIB transport to an external solver process.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::exec::{par_map_owned, Strategy};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    Invalid { model: Option<String> },
    Unknown { reason: String },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub path: PathBuf,
    /// Wall-clock limit per query.
    pub timeout: Duration,
    /// Deterministic resource limit per `check-sat`; 0 disables it.
    pub rlimit: u64,
    pub extra_args: Vec<String>,
}

pub const DEFAULT_RLIMIT: u64 = 300_000;

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            path: default_solver_path(),
            timeout: Duration::from_secs(10),
            rlimit: DEFAULT_RLIMIT,
            extra_args: Vec::new(),
        }
    }
}

/// `$FORGE_SOLVER`, else `z3` from `PATH`.
pub fn default_solver_path() -> PathBuf {
    std::env::var_os("FORGE_SOLVER")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("z3"))
}

const END: &str = "@@end";

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

#[derive(Debug)]
enum SessionError {
    Timeout,
    Crashed(String),
}

impl Session {
    fn spawn(cfg: &SolverConfig) -> Result<Session, SessionError> {
        let mut child = Command::new(&cfg.path)
            .args(["-in", "-smt2"])
            .args(&cfg.extra_args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SessionError::Crashed(format!("spawn {}: {e}", cfg.path.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
        })
    }

    /// Send commands and collect output up to the end marker.
    fn exchange(&mut self, commands: &str, deadline: Instant) -> Result<Vec<String>, SessionError> {
        let sent = self
            .stdin
            .write_all(commands.as_bytes())
            .and_then(|_| writeln!(self.stdin, "(echo \"{END}\")"))
            .and_then(|_| self.stdin.flush());
        if let Err(e) = sent {
            return Err(SessionError::Crashed(e.to_string()));
        }
        let mut out = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(l) if l == END => return Ok(out),
                Ok(l) => out.push(l),
                Err(RecvTimeoutError::Timeout) => return Err(SessionError::Timeout),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(SessionError::Crashed(out.join("\n")))
                }
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A pool of interactive solver sessions. Every query starts from `(reset)`,
/// so verdicts do not depend on which session served it.
pub struct Solver {
    config: SolverConfig,
    idle: Mutex<Vec<Session>>,
    queries: AtomicUsize,
}

enum Sat {
    Sat,
    Unsat,
    Unknown(String),
}

fn parse_sat(lines: &[String]) -> Sat {
    for l in lines {
        match l.trim() {
            "sat" => return Sat::Sat,
            "unsat" => return Sat::Unsat,
            "unknown" => return Sat::Unknown("incomplete".into()),
            _ => {}
        }
    }
    Sat::Unknown(format!("unexpected solver output: {}", lines.join(" ")))
}

/// Truth values from a `get-value` response over `g.N` names; `None` where
/// the model does not evaluate the goal to a Boolean constant.
fn parse_values(lines: &[String]) -> Vec<(usize, Option<bool>)> {
    let text = lines.join(" ");
    let mut out = Vec::new();
    for part in text.split("(g.").skip(1) {
        let mut it = part.split(|c: char| c.is_whitespace() || c == ')' || c == '(');
        let idx = it.next().and_then(|s| s.parse().ok());
        let val = it.find(|s| !s.is_empty());
        if let Some(i) = idx {
            let v = match val {
                Some("true") => Some(true),
                Some("false") => Some(false),
                _ => None,
            };
            out.push((i, v));
        }
    }
    out
}

impl Solver {
    pub fn new(config: SolverConfig) -> Solver {
        Solver {
            config,
            idle: Mutex::new(Vec::new()),
            queries: AtomicUsize::new(0),
        }
    }

    /// Number of `check-sat` calls issued so far.
    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    /// Whether the solver binary can be started and answers a trivial query.
    pub fn available(&self) -> bool {
        self.check_group("", &["true".to_string()])
            .first()
            .is_some_and(Verdict::is_valid)
    }

    fn options(&self) -> String {
        let mut s = String::from(
            "(reset)\n(set-option :produce-models true)\n(set-option :smt.random_seed 0)\n",
        );
        if self.config.rlimit > 0 {
            s.push_str(&format!("(set-option :rlimit {})\n", self.config.rlimit));
        }
        s
    }

    fn session(&self) -> Result<Session, SessionError> {
        match self.idle.lock().expect("solver pool").pop() {
            Some(s) => Ok(s),
            None => Session::spawn(&self.config),
        }
    }

    /// Validity of each goal under the hypotheses in `context` (declarations
    /// and assertions). Goals are first checked together; the false ones in a
    /// countermodel are split off and the rest retried. When the solver gives
    /// up on a group, the undecided goals are checked one by one in parallel.
    /// A timeout costs the session and, when checking one goal, that goal.
    pub fn check_group(&self, context: &str, goals: &[String]) -> Vec<Verdict> {
        let mut verdicts: Vec<Option<Verdict>> = vec![None; goals.len()];
        if goals.len() > 1 {
            match self.session() {
                Ok(mut session) => match self.run_group(&mut session, context, goals, &mut verdicts) {
                    Ok(()) => self.release(session),
                    Err(SessionError::Timeout) => log::debug!("solver timeout on a group"),
                    Err(SessionError::Crashed(t)) => log::warn!("solver crashed: {t}"),
                },
                Err(e) => log::warn!("solver unavailable: {e:?}"),
            }
        }
        let open: Vec<usize> = (0..goals.len()).filter(|i| verdicts[*i].is_none()).collect();
        let decided = par_map_owned(Strategy::default(), open, |i| (i, self.check_one(context, &goals[i])));
        for (i, v) in decided {
            verdicts[i] = Some(v);
        }
        verdicts.into_iter().map(|v| v.expect("every goal decided")).collect()
    }

    fn release(&self, session: Session) {
        self.idle.lock().expect("solver pool").push(session);
    }

    fn setup(&self, s: &mut Session, context: &str, goals: &[(usize, &String)]) -> Result<Option<String>, SessionError> {
        let mut setup = self.options();
        setup.push_str(context);
        for (i, g) in goals {
            setup.push_str(&format!("(define-fun g.{i} () Bool {g})\n"));
        }
        let errors: Vec<String> = s
            .exchange(&setup, Instant::now() + self.config.timeout)?
            .into_iter()
            .filter(|l| l.contains("error"))
            .collect();
        Ok((!errors.is_empty()).then(|| format!("rejected script: {}", errors.join(" "))))
    }

    fn run_group(
        &self,
        s: &mut Session,
        context: &str,
        goals: &[String],
        verdicts: &mut [Option<Verdict>],
    ) -> Result<(), SessionError> {
        let named: Vec<(usize, &String)> = goals.iter().enumerate().collect();
        if let Some(reason) = self.setup(s, context, &named)? {
            for v in verdicts.iter_mut() {
                *v = Some(Verdict::Unknown { reason: reason.clone() });
            }
            return Ok(());
        }
        let mut ex = |cmd: &str| s.exchange(cmd, Instant::now() + self.config.timeout);
        let mut remaining: Vec<usize> = (0..goals.len()).collect();
        while remaining.len() > 1 {
            let conj: Vec<String> = remaining.iter().map(|i| format!("g.{i}")).collect();
            self.queries.fetch_add(1, Ordering::Relaxed);
            let t0 = Instant::now();
            let out = ex(&format!(
                "(push 1)\n(assert (not (and {})))\n(check-sat)\n",
                conj.join(" ")
            ))?;
            log::trace!("group of {}: {:?} {:?}", conj.len(), out.first(), t0.elapsed());
            let progress = match parse_sat(&out) {
                Sat::Unsat => {
                    for &i in &remaining {
                        verdicts[i] = Some(Verdict::Valid);
                    }
                    remaining.clear();
                    true
                }
                Sat::Sat => {
                    let vals = parse_values(&ex(&format!("(get-value ({}))\n", conj.join(" ")))?);
                    let falsified: Vec<usize> =
                        vals.iter().filter(|(_, v)| *v == Some(false)).map(|(i, _)| *i).collect();
                    if vals.iter().any(|(_, v)| v.is_none()) {
                        log::debug!("model leaves some goals unevaluated");
                    }
                    for &i in &falsified {
                        verdicts[i] = Some(Verdict::Invalid { model: None });
                    }
                    remaining.retain(|i| !falsified.contains(i));
                    !falsified.is_empty()
                }
                Sat::Unknown(_) => false,
            };
            ex("(pop 1)\n")?;
            if !progress {
                break;
            }
        }
        Ok(())
    }

    fn check_one(&self, context: &str, goal: &String) -> Verdict {
        let mut s = match self.session() {
            Ok(s) => s,
            Err(e) => {
                log::warn!("solver unavailable: {e:?}");
                return Verdict::Unknown { reason: format!("{e:?}") };
            }
        };
        match self.decide(&mut s, context, goal) {
            Ok(v) => {
                self.release(s);
                v
            }
            Err(SessionError::Timeout) => Verdict::Unknown { reason: "timeout".into() },
            Err(SessionError::Crashed(t)) => {
                log::warn!("solver crashed: {t}");
                Verdict::Unknown { reason: format!("crash: {t}") }
            }
        }
    }

    fn decide(&self, s: &mut Session, context: &str, goal: &String) -> Result<Verdict, SessionError> {
        if let Some(reason) = self.setup(s, context, &[(0, goal)])? {
            return Ok(Verdict::Unknown { reason });
        }
        let mut ex = |cmd: &str| s.exchange(cmd, Instant::now() + self.config.timeout);
        self.queries.fetch_add(1, Ordering::Relaxed);
        let t0 = Instant::now();
        let out = ex("(push 1)\n(assert (not g.0))\n(check-sat)\n")?;
        log::trace!("single: {:?} {:?}", out.first(), t0.elapsed());
        let v = match parse_sat(&out) {
            Sat::Unsat => Verdict::Valid,
            Sat::Sat => {
                let model = ex("(get-model)\n")?.join("\n");
                Verdict::Invalid { model: Some(model) }
            }
            Sat::Unknown(reason) => Verdict::Unknown { reason },
        };
        ex("(pop 1)\n")?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn get_value_parsing() {
        let lines = vec!["((g.0 true)".to_string(), " (g.12 false))".to_string()];
        assert_eq!(parse_values(&lines), vec![(0, Some(true)), (12, Some(false))]);
        let lines = vec!["((g.3 (forall ((k Int)) (> k 0))))".to_string()];
        assert_eq!(parse_values(&lines), vec![(3, None)]);
    }
}
