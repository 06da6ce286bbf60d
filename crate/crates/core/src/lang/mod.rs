//! The annotated mini-language: syntax, types and formula utilities.

pub mod ast;
pub mod normalize;
pub mod parser;
pub mod paths;
pub mod predicates;
mod printer;
pub mod subst;
pub mod typecheck;

pub use ast::*;
pub use normalize::{key, normalize};
pub use parser::{parse_formula, parse_program, ParseError};
pub use paths::{subexpressions, Path};
pub use predicates::{lookup, PredicateDef};
pub use typecheck::{typecheck, TypeEnv, TypeError, TypedProgram};
