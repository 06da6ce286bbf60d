//! Candidate invariants shared by the miners, the interpreter and the prover.

use serde::Serialize;

use crate::lang::{key, Formula};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Template,
    Mutation { wave: usize },
    /// Golden invariant fed back in by tests; never produced by inference.
    Given,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Fresh,
    Surviving,
    Proved,
    Falsified,
    Unproved,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub loop_id: usize,
    pub formula: Formula,
    /// Normalized printed form; candidates with equal keys are duplicates.
    pub key: String,
    pub origin: Origin,
    pub status: Status,
}

impl Candidate {
    pub fn new(loop_id: usize, formula: Formula, origin: Origin) -> Candidate {
        let key = key(&formula);
        Candidate {
            loop_id,
            formula,
            key,
            origin,
            status: Status::Fresh,
        }
    }

    pub fn with_status(mut self, status: Status) -> Candidate {
        self.status = status;
        self
    }
}

impl std::fmt::Display for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "loop {}: {}", self.loop_id, self.formula)
    }
}
