//! Library behind the `planc` tool: a planning-profile model graph, its
//! interchange format, the profile rule engine, a PDDL 3.1 fragment
//! (AST, parser, canonical printer), the model-to-PDDL compiler, and a
//! desk-scale cost-optimal planner with plan validation.

pub mod compile;
pub mod diag;
pub mod fixtures;
pub mod ingest;
pub mod model;
pub mod pddl;
pub mod planner;
pub mod validate;

#[cfg(test)]
pub(crate) mod testutil;

pub use diag::{Diagnostic, Severity};
