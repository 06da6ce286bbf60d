use std::collections::BTreeSet;

use serde::Serialize;

use super::eval::{compile, CExpr, Ctx, Fault};
use super::value::{Env, Layout, Value};
use crate::lang::{Stmt, TypedProgram};

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ProbeKind {
    BeforeEntry,
    AtEntry,
    AtExit,
    AfterExit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbeEvent {
    pub loop_id: usize,
    pub kind: ProbeKind,
    /// Deep copy of the slot state.
    pub state: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Outcome {
    Normal(Option<Value>),
    PreconditionViolated,
    RuntimeError(Fault),
    StepLimitExceeded,
}

/// A coverage goal of the test generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Pre { clause: usize, pass: bool },
    If { id: usize, taken: bool },
    LoopSkip(usize),
    LoopEnter(usize),
    LoopRepeat(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    /// Initial slot state; also the `\old` snapshot.
    pub input: Vec<Value>,
    pub events: Vec<ProbeEvent>,
    pub outcome: Outcome,
    pub branches: BTreeSet<Branch>,
    pub final_state: Vec<Value>,
}

impl Trace {
    pub fn is_normal(&self) -> bool {
        matches!(self.outcome, Outcome::Normal(_))
    }

    pub fn result(&self) -> Option<&Value> {
        match &self.outcome {
            Outcome::Normal(r) => r.as_ref(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
enum CStmt {
    Skip,
    Assign(usize, CExpr),
    Store(usize, CExpr, CExpr),
    If(usize, CExpr, Box<CStmt>, Box<CStmt>),
    While(usize, CExpr, Box<CStmt>),
    Seq(Vec<CStmt>),
}

fn compile_stmt(s: &Stmt, layout: &Layout) -> CStmt {
    let ce = |e| compile(e, layout).expect("typechecked program compiles");
    let slot = |n: &str| layout.slot(n).expect("declared variable");
    match s {
        Stmt::Skip => CStmt::Skip,
        Stmt::Assign { target, rhs } => CStmt::Assign(slot(target), ce(rhs)),
        Stmt::Store { array, index, rhs } => CStmt::Store(slot(array), ce(index), ce(rhs)),
        Stmt::If {
            id,
            cond,
            then,
            els,
        } => CStmt::If(
            *id,
            ce(cond),
            Box::new(compile_stmt(then, layout)),
            Box::new(compile_stmt(els, layout)),
        ),
        Stmt::While { id, cond, body, .. } => {
            CStmt::While(*id, ce(cond), Box::new(compile_stmt(body, layout)))
        }
        Stmt::Seq(items) => CStmt::Seq(items.iter().map(|i| compile_stmt(i, layout)).collect()),
    }
}

enum Stop {
    Fault(Fault),
    Steps,
}

impl From<Fault> for Stop {
    fn from(f: Fault) -> Stop {
        Stop::Fault(f)
    }
}

struct Machine<'a> {
    state: Vec<Value>,
    old: &'a [Value],
    steps: u64,
    limit: u64,
    events: Vec<ProbeEvent>,
    branches: BTreeSet<Branch>,
}

impl Machine<'_> {
    fn tick(&mut self) -> Result<(), Stop> {
        self.steps += 1;
        if self.steps > self.limit {
            Err(Stop::Steps)
        } else {
            Ok(())
        }
    }

    fn eval(&self, e: &CExpr) -> Result<Value, Fault> {
        let ctx = Ctx {
            cur: &self.state,
            old: self.old,
            result: None,
        };
        Ok(ctx.eval(e, &mut Vec::new())?.to_value())
    }

    fn cond(&self, e: &CExpr) -> Result<bool, Fault> {
        Ctx {
            cur: &self.state,
            old: self.old,
            result: None,
        }
        .eval_bool(e)
    }

    fn probe(&mut self, loop_id: usize, kind: ProbeKind) {
        self.events.push(ProbeEvent {
            loop_id,
            kind,
            state: self.state.clone(),
        });
    }

    fn exec(&mut self, s: &CStmt) -> Result<(), Stop> {
        match s {
            CStmt::Skip => self.tick(),
            CStmt::Assign(slot, e) => {
                self.tick()?;
                self.state[*slot] = self.eval(e)?;
                Ok(())
            }
            CStmt::Store(slot, i, e) => {
                self.tick()?;
                let i = self.eval(i)?.as_int().expect("int index");
                let v = self.eval(e)?.as_int().expect("int element");
                match &mut self.state[*slot] {
                    Value::Array(a) => {
                        if i < 0 || i >= a.len() as i64 {
                            return Err(Fault::OutOfBounds.into());
                        }
                        a[i as usize] = v;
                        Ok(())
                    }
                    _ => Err(Fault::NullAccess.into()),
                }
            }
            CStmt::If(id, c, t, e) => {
                self.tick()?;
                let taken = self.cond(c)?;
                self.branches.insert(Branch::If { id: *id, taken });
                self.exec(if taken { t } else { e })
            }
            CStmt::While(id, c, body) => {
                self.probe(*id, ProbeKind::BeforeEntry);
                let mut iterations = 0u64;
                loop {
                    self.tick()?;
                    if !self.cond(c)? {
                        break;
                    }
                    iterations += 1;
                    match iterations {
                        1 => self.branches.insert(Branch::LoopEnter(*id)),
                        2 => self.branches.insert(Branch::LoopRepeat(*id)),
                        _ => false,
                    };
                    self.probe(*id, ProbeKind::AtEntry);
                    self.exec(body)?;
                    self.probe(*id, ProbeKind::AtExit);
                }
                if iterations == 0 {
                    self.branches.insert(Branch::LoopSkip(*id));
                }
                self.probe(*id, ProbeKind::AfterExit);
                Ok(())
            }
            CStmt::Seq(items) => {
                for i in items {
                    self.exec(i)?;
                }
                Ok(())
            }
        }
    }
}

/// A program compiled for repeated execution.
#[derive(Clone, Debug)]
pub struct Interpreter {
    layout: Layout,
    pre: Vec<CExpr>,
    body: CStmt,
}

impl Interpreter {
    pub fn new(program: &TypedProgram) -> Interpreter {
        let layout = Layout::of_program(program);
        let pre = program
            .pre
            .iter()
            .map(|f| compile(f, &layout).expect("typechecked precondition compiles"))
            .collect();
        let body = compile_stmt(&program.body, &layout);
        Interpreter { layout, pre, body }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn run(&self, input: &Env, step_limit: u64) -> Trace {
        self.run_state(self.layout.initial_state(input), step_limit)
    }

    pub fn run_state(&self, input: Vec<Value>, step_limit: u64) -> Trace {
        let mut branches = BTreeSet::new();
        for (clause, c) in self.pre.iter().enumerate() {
            let ctx = Ctx {
                cur: &input,
                old: &input,
                result: None,
            };
            // an undefined clause counts as failed
            let pass = ctx.eval_bool(c).unwrap_or(false);
            branches.insert(Branch::Pre { clause, pass });
            if !pass {
                return Trace {
                    final_state: input.clone(),
                    input,
                    events: Vec::new(),
                    outcome: Outcome::PreconditionViolated,
                    branches,
                };
            }
        }
        let mut m = Machine {
            state: input.clone(),
            old: &input,
            steps: 0,
            limit: step_limit,
            events: Vec::new(),
            branches,
        };
        let outcome = match m.exec(&self.body) {
            Ok(()) => Outcome::Normal(self.layout.result.map(|s| m.state[s].clone())),
            Err(Stop::Fault(f)) => Outcome::RuntimeError(f),
            Err(Stop::Steps) => Outcome::StepLimitExceeded,
        };
        let Machine {
            state,
            events,
            branches,
            ..
        } = m;
        Trace {
            input,
            events,
            outcome,
            branches,
            final_state: state,
        }
    }
}
