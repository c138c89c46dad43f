//! PDDL 3.1 fragment: AST, parser and canonical printer.
//!
//! The fragment covers `:typing`, `:negative-preconditions` and
//! `:action-costs` over a single `(total-cost)` function — conditions
//! are conjunctions of literals, effects add, delete and increase.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::{
    infer_requirements, ActionDef, Atom, Condition, Effect, FunctionDecl, FunctionInit,
    FunctionTerm, InvalidName, NumericExpr, PddlDomain, PddlName, PddlProblem, PredicateDecl,
    Requirement, Term, TypeDecl, TypedEntry, FN_TOTAL_COST, TYPE_OBJECT,
};
pub use parser::{parse_domain, parse_problem, parse_problem_standalone};
pub use printer::{fmt_number, print_action, print_domain, print_problem};
