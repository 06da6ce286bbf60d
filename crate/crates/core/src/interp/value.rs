use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::{Ident, Program, Type};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Null,
    Array(Vec<i64>),
}

impl Value {
    pub fn default_for(t: Type) -> Value {
        match t {
            Type::Int => Value::Int(0),
            Type::Bool => Value::Bool(false),
            Type::IntArray => Value::Null,
        }
    }

    pub fn has_type(&self, t: Type) -> bool {
        matches!(
            (self, t),
            (Value::Int(_), Type::Int)
                | (Value::Bool(_), Type::Bool)
                | (Value::Null | Value::Array(_), Type::IntArray)
        )
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Null => f.write_str("null"),
            Value::Array(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

/// Named variable bindings, with optional entry snapshot and result.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Env {
    pub vars: BTreeMap<Ident, Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub old: BTreeMap<Ident, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn with(mut self, name: &str, v: Value) -> Env {
        self.vars.insert(name.to_string(), v);
        self
    }
}

/// Slot assignment for a program's variables (params, result, locals).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub names: Vec<Ident>,
    pub types: Vec<Type>,
    /// Slot of the declared result variable, if any.
    pub result: Option<usize>,
    pub params: usize,
}

impl Layout {
    pub fn of_program(p: &Program) -> Layout {
        let vars = p.all_vars();
        Layout {
            names: vars.iter().map(|(n, _)| n.clone()).collect(),
            types: vars.iter().map(|(_, t)| *t).collect(),
            result: p.ret.as_ref().map(|_| p.params.len()),
            params: p.params.len(),
        }
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Named view of a slot state.
    pub fn to_env(&self, state: &[Value]) -> Env {
        Env {
            vars: self.names.iter().cloned().zip(state.iter().cloned()).collect(),
            ..Env::default()
        }
    }

    /// Initial state from an input environment: params taken from `env`,
    /// everything else default-initialized.
    pub fn initial_state(&self, env: &Env) -> Vec<Value> {
        self.names
            .iter()
            .zip(self.types.iter())
            .enumerate()
            .map(|(i, (n, t))| match env.vars.get(n) {
                Some(v) if i < self.params => v.clone(),
                _ => Value::default_for(*t),
            })
            .collect()
    }
}
