//! Verification-condition generation by forward symbolic execution.
//!
//! Variables are renamed into SSA symbols as the body is walked; definitional
//! equalities and path-guarded assumptions accumulate in a shared fact list.
//! Each obligation records how many facts precede it and the path condition
//! it is checked under, so obligations never see assumptions made later in
//! the program.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::encode::{and, implies, int_lit, not, sort_of, Enc, EncodingError, SVal, Scope, State, PRELUDE};
use crate::lang::{Expr, Formula, Ident, Stmt, Type, TypedProgram};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VcKind {
    Initiation { loop_id: usize, index: usize },
    Preservation { loop_id: usize, index: usize },
    Post { clause: usize },
    /// Definedness of an evaluated expression: null, bounds or division.
    Safety { site: String },
}

impl VcKind {
    /// Obligations of the program itself, as opposed to invariant checks.
    pub fn is_program_obligation(&self) -> bool {
        matches!(self, VcKind::Post { .. } | VcKind::Safety { .. })
    }

    pub fn slug(&self) -> String {
        match self {
            VcKind::Initiation { loop_id, index } => format!("init_l{loop_id}_{index}"),
            VcKind::Preservation { loop_id, index } => format!("pres_l{loop_id}_{index}"),
            VcKind::Post { clause } => format!("post_{clause}"),
            VcKind::Safety { site } => format!(
                "safety_{}",
                site.chars()
                    .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                    .collect::<String>()
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vc {
    pub id: usize,
    pub kind: VcKind,
    /// Number of leading facts in scope.
    pub facts: usize,
    pub path: Vec<String>,
    pub goal: String,
}

/// All obligations of one program under one invariant map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VcSet {
    pub decls: Vec<(String, &'static str)>,
    pub facts: Vec<String>,
    pub vcs: Vec<Vc>,
}

impl VcSet {
    /// Declarations, prelude and hypotheses shared by obligations with this
    /// fact prefix and path.
    pub fn context(&self, facts: usize, path: &[String]) -> String {
        let mut s = String::from(PRELUDE);
        for (name, sort) in &self.decls {
            let _ = writeln!(s, "(declare-const {name} {sort})");
        }
        for f in self.facts[..facts].iter().chain(path) {
            let _ = writeln!(s, "(assert {f})");
        }
        s
    }

    /// A self-contained script for one obligation, for offline replay.
    pub fn script(&self, vc: &Vc) -> String {
        let mut s = self.context(vc.facts, &vc.path);
        let _ = writeln!(s, "(assert (not {}))\n(check-sat)", vc.goal);
        s
    }

    /// Obligations grouped by shared context, in first-occurrence order.
    pub fn groups(&self, pick: impl Fn(&Vc) -> bool) -> Vec<Vec<&Vc>> {
        let mut index: BTreeMap<(usize, &[String]), usize> = BTreeMap::new();
        let mut out: Vec<Vec<&Vc>> = Vec::new();
        for vc in self.vcs.iter().filter(|v| pick(v)) {
            let k = (vc.facts, vc.path.as_slice());
            match index.get(&k) {
                Some(&i) => out[i].push(vc),
                None => {
                    index.insert(k, out.len());
                    out.push(vec![vc]);
                }
            }
        }
        out
    }
}

struct Gen<'a> {
    program: &'a TypedProgram,
    invariants: &'a BTreeMap<usize, Vec<Formula>>,
    counters: BTreeMap<String, usize>,
    entry: State,
    set: VcSet,
}

impl Gen<'_> {
    fn fresh(&mut self, base: &str, sort: &'static str) -> String {
        let n = self.counters.entry(base.to_string()).or_insert(0);
        *n += 1;
        let name = format!("{base}.{n}");
        self.set.decls.push((name.clone(), sort));
        name
    }

    fn encode(&self, e: &Expr, cur: &State) -> Result<Enc, EncodingError> {
        let result = self.program.ret.as_ref().and_then(|(r, _)| cur.get(r));
        Scope {
            types: &self.program.env().vars,
            cur,
            old: &self.entry,
            result,
        }
        .encode(e)
    }

    fn fact(&mut self, path: &[String], t: String) {
        let t = implies(&and(path.iter().cloned()), &t);
        if t != "true" {
            self.set.facts.push(t);
        }
    }

    fn obligation(&mut self, kind: VcKind, path: &[String], goal: String) {
        let id = self.set.vcs.len();
        self.set.vcs.push(Vc {
            id,
            kind,
            facts: self.set.facts.len(),
            path: path.to_vec(),
            goal,
        });
    }

    /// Check `def` as a safety obligation, then assume it.
    fn safety(&mut self, site: String, path: &[String], def: String) {
        if def == "true" {
            return;
        }
        self.obligation(VcKind::Safety { site }, path, def.clone());
        self.fact(path, def);
    }

    fn exec(&mut self, s: &Stmt, st: &mut State, path: &mut Vec<String>) -> Result<(), EncodingError> {
        match s {
            Stmt::Skip => {}
            Stmt::Assign { target, rhs } => {
                let e = self.encode(rhs, st)?;
                self.safety(format!("{target} := {rhs}"), path, e.def);
                let ty = self.program.var_type(target).expect("declared");
                let sym = self.fresh(target, sort_of(ty));
                self.set.facts.push(format!("(= {sym} {})", e.val));
                st.insert(target.clone(), SVal::Scalar(sym));
            }
            Stmt::Store { array, index, rhs } => {
                let read = Expr::Index(Box::new(Expr::var(array)), Box::new(index.clone()));
                let (i, v) = (self.encode(&read, st)?, self.encode(rhs, st)?);
                let idx = self.encode(index, st)?.val;
                self.safety(format!("{array}[{index}] := {rhs}"), path, and([i.def, v.def]));
                let Some(SVal::Array { null, len, data }) = st.get(array).cloned() else {
                    unreachable!("typechecked store target");
                };
                let d = self.fresh(&format!("{array}.d"), sort_of(Type::IntArray));
                self.set.facts.push(format!("(= {d} (store {data} {idx} {}))", v.val));
                st.insert(array.clone(), SVal::Array { null, len, data: d });
            }
            Stmt::If { cond, then, els, .. } => {
                let c = self.encode(cond, st)?;
                self.safety(format!("if ({cond})"), path, c.def);
                let mut st_t = st.clone();
                path.push(c.val.clone());
                self.exec(then, &mut st_t, path)?;
                path.pop();
                let mut st_e = st.clone();
                path.push(not(&c.val));
                self.exec(els, &mut st_e, path)?;
                path.pop();
                for (name, vt) in &st_t {
                    let ve = &st_e[name];
                    if vt == ve {
                        continue;
                    }
                    let ty = self.program.var_type(name).expect("declared");
                    let merged = match (vt, ve) {
                        (SVal::Scalar(a), SVal::Scalar(b)) => {
                            let m = self.fresh(name, sort_of(ty));
                            self.set.facts.push(format!("(= {m} (ite {} {a} {b}))", c.val));
                            SVal::Scalar(m)
                        }
                        (
                            SVal::Array { null, len, data: a },
                            SVal::Array { data: b, .. },
                        ) => {
                            let m = self.fresh(&format!("{name}.d"), sort_of(ty));
                            self.set.facts.push(format!("(= {m} (ite {} {a} {b}))", c.val));
                            SVal::Array {
                                null: null.clone(),
                                len: len.clone(),
                                data: m,
                            }
                        }
                        _ => unreachable!("variable kinds never change"),
                    };
                    st.insert(name.clone(), merged);
                }
            }
            Stmt::While { id, cond, body, .. } => {
                let invs = self.invariants.get(id).cloned().unwrap_or_default();
                for (index, inv) in invs.iter().enumerate() {
                    let goal = self.encode(inv, st)?.holds();
                    self.obligation(VcKind::Initiation { loop_id: *id, index }, path, goal);
                }
                let mut h = st.clone();
                for v in body.modified_vars() {
                    let ty = self.program.var_type(&v).expect("declared");
                    let new = match &st[&v] {
                        SVal::Scalar(_) => SVal::Scalar(self.fresh(&v, sort_of(ty))),
                        SVal::Array { null, len, .. } => SVal::Array {
                            null: null.clone(),
                            len: len.clone(),
                            data: self.fresh(&format!("{v}.d"), sort_of(ty)),
                        },
                    };
                    h.insert(v, new);
                }
                for inv in &invs {
                    let t = self.encode(inv, &h)?.holds();
                    self.fact(path, t);
                }
                let g = self.encode(cond, &h)?;
                self.safety(format!("loop {id} guard"), path, g.def);
                let mut st_b = h.clone();
                path.push(g.val.clone());
                self.exec(body, &mut st_b, path)?;
                for (index, inv) in invs.iter().enumerate() {
                    let goal = self.encode(inv, &st_b)?.holds();
                    self.obligation(VcKind::Preservation { loop_id: *id, index }, path, goal);
                }
                path.pop();
                self.fact(path, not(&g.val));
                *st = h;
            }
            Stmt::Seq(items) => {
                for i in items {
                    self.exec(i, st, path)?;
                }
            }
        }
        Ok(())
    }
}

/// Initial symbolic state: parameters are unconstrained symbols, locals hold
/// their default values.
fn entry_state(program: &TypedProgram, decls: &mut Vec<(String, &'static str)>, facts: &mut Vec<String>) -> State {
    let mut st = State::new();
    for (name, ty) in program.all_vars() {
        let param = program.is_param(&name);
        let v = match ty {
            Type::IntArray => {
                let data = format!("{name}.d0");
                decls.push((data.clone(), sort_of(ty)));
                if param {
                    let (null, len) = (format!("{name}.null"), format!("{name}.len"));
                    decls.push((null.clone(), "Bool"));
                    decls.push((len.clone(), "Int"));
                    facts.push(format!("(<= 0 {len})"));
                    SVal::Array { null, len, data }
                } else {
                    SVal::Array {
                        null: "true".into(),
                        len: "0".into(),
                        data,
                    }
                }
            }
            _ if param => {
                let s = format!("{name}.0");
                decls.push((s.clone(), sort_of(ty)));
                SVal::Scalar(s)
            }
            Type::Int => SVal::Scalar(int_lit(0)),
            Type::Bool => SVal::Scalar("false".into()),
        };
        st.insert(name, v);
    }
    st
}

/// Obligations of `program` annotated with `invariants` (by loop id): per
/// invariant an initiation and a preservation check, every postcondition
/// clause, and every nontrivial definedness condition of the body.
pub fn generate_vcs(
    program: &TypedProgram,
    invariants: &BTreeMap<usize, Vec<Formula>>,
) -> Result<VcSet, EncodingError> {
    let mut set = VcSet {
        decls: Vec::new(),
        facts: Vec::new(),
        vcs: Vec::new(),
    };
    let entry = entry_state(program, &mut set.decls, &mut set.facts);
    let mut g = Gen {
        program,
        invariants,
        counters: BTreeMap::new(),
        entry: entry.clone(),
        set,
    };
    for p in &program.pre {
        let t = g.encode(p, &entry)?.holds();
        g.fact(&[], t);
    }
    let mut st = entry;
    g.exec(&program.body, &mut st, &mut Vec::new())?;
    for (clause, q) in program.post.iter().enumerate() {
        let goal = g.encode(q, &st)?.holds();
        g.obligation(VcKind::Post { clause }, &[], goal);
    }
    Ok(g.set)
}

/// Symbols for every program variable and its entry value, constrained only
/// by nonnegative lengths and, since no statement reallocates an array, by
/// arrays sharing their null flag and length with their entry value. Used for
/// context-free queries.
pub fn free_scope(types: &BTreeMap<Ident, Type>) -> (Vec<(String, &'static str)>, Vec<String>, State, State) {
    let mut decls = Vec::new();
    let mut facts = Vec::new();
    let mut cur = State::new();
    let mut old = State::new();
    for (name, ty) in types {
        match ty {
            Type::IntArray => {
                let (null, len) = (format!("{name}.null"), format!("{name}.len"));
                decls.push((null.clone(), "Bool"));
                decls.push((len.clone(), "Int"));
                facts.push(format!("(<= 0 {len})"));
                for (st, tag) in [(&mut cur, "c"), (&mut old, "o")] {
                    let data = format!("{name}.{tag}.d");
                    decls.push((data.clone(), sort_of(*ty)));
                    st.insert(
                        name.clone(),
                        SVal::Array {
                            null: null.clone(),
                            len: len.clone(),
                            data,
                        },
                    );
                }
            }
            _ => {
                for (st, tag) in [(&mut cur, "c"), (&mut old, "o")] {
                    let s = format!("{name}.{tag}");
                    decls.push((s.clone(), sort_of(*ty)));
                    st.insert(name.clone(), SVal::Scalar(s));
                }
            }
        }
    }
    (decls, facts, cur, old)
}
