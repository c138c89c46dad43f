//! AST for the supported PDDL 3.1 fragment: typing, negative
//! preconditions, conjunctive conditions and effects, and additive
//! action costs over `(total-cost)`.
//!
//! Names compare case-insensitively (PDDL identifiers are
//! case-insensitive) but keep their original spelling for printing.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{0}` is not a valid PDDL name")]
pub struct InvalidName(pub String);

/// A PDDL `<name>` token: a letter followed by letters, digits, `-`
/// or `_`.
#[derive(Debug, Clone)]
pub struct PddlName(String);

impl PddlName {
    pub fn new(s: &str) -> Result<Self, InvalidName> {
        if Self::is_valid(s) {
            Ok(PddlName(s.to_string()))
        } else {
            Err(InvalidName(s.to_string()))
        }
    }

    pub fn is_valid(s: &str) -> bool {
        let mut chars = s.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PddlName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq for PddlName {
    fn eq(&self, other: &Self) -> bool {
        self.0.eq_ignore_ascii_case(&other.0)
    }
}

impl Eq for PddlName {}

impl PartialEq<&str> for PddlName {
    fn eq(&self, other: &&str) -> bool {
        self.0.eq_ignore_ascii_case(other)
    }
}

impl PartialOrd for PddlName {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PddlName {
    fn cmp(&self, other: &Self) -> Ordering {
        let a = self.0.bytes().map(|b| b.to_ascii_lowercase());
        let b = other.0.bytes().map(|b| b.to_ascii_lowercase());
        a.cmp(b)
    }
}

impl Hash for PddlName {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for b in self.0.bytes() {
            state.write_u8(b.to_ascii_lowercase());
        }
    }
}

pub const TYPE_OBJECT: &str = "object";
pub const FN_TOTAL_COST: &str = "total-cost";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Requirement {
    Typing,
    ActionCosts,
    NegativePreconditions,
}

impl Requirement {
    pub fn keyword(self) -> &'static str {
        match self {
            Requirement::Typing => ":typing",
            Requirement::ActionCosts => ":action-costs",
            Requirement::NegativePreconditions => ":negative-preconditions",
        }
    }
}

/// One entry of a typed list. `name` keeps the surface form, so
/// variables include their leading `?`. Comparison of entry names is
/// case-insensitive, like every other PDDL identifier.
#[derive(Debug, Clone)]
pub struct TypedEntry {
    pub name: String,
    pub ty: PddlName,
}

impl TypedEntry {
    pub fn new(name: impl Into<String>, ty: PddlName) -> Self {
        TypedEntry {
            name: name.into(),
            ty,
        }
    }

    pub fn is_variable(&self) -> bool {
        self.name.starts_with('?')
    }
}

impl PartialEq for TypedEntry {
    fn eq(&self, other: &Self) -> bool {
        self.name.eq_ignore_ascii_case(&other.name) && self.ty == other.ty
    }
}

#[derive(Debug, Clone)]
pub enum Term {
    /// Includes the leading `?`.
    Variable(String),
    Constant(PddlName),
}

impl Term {
    pub fn text(&self) -> &str {
        match self {
            Term::Variable(v) => v,
            Term::Constant(c) => c.as_str(),
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Term::Variable(a), Term::Variable(b)) => a.eq_ignore_ascii_case(b),
            (Term::Constant(a), Term::Constant(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub predicate: PddlName,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Atom(Atom),
    /// Negation applies to atoms only in this fragment.
    Not(Atom),
    And(Vec<Condition>),
}

impl Condition {
    /// All atoms in the tree, with their polarity (true = positive).
    pub fn literals(&self) -> Vec<(&Atom, bool)> {
        let mut out = Vec::new();
        self.collect_literals(&mut out);
        out
    }

    fn collect_literals<'a>(&'a self, out: &mut Vec<(&'a Atom, bool)>) {
        match self {
            Condition::Atom(a) => out.push((a, true)),
            Condition::Not(a) => out.push((a, false)),
            Condition::And(cs) => cs.iter().for_each(|c| c.collect_literals(out)),
        }
    }

    pub fn has_negation(&self) -> bool {
        self.literals().iter().any(|(_, positive)| !positive)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTerm {
    pub function: PddlName,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumericExpr {
    Literal(f64),
    Function(FunctionTerm),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Add(Atom),
    Delete(Atom),
    Increase {
        target: FunctionTerm,
        amount: NumericExpr,
    },
    And(Vec<Effect>),
}

impl Effect {
    pub fn flattened(&self) -> Vec<&Effect> {
        let mut out = Vec::new();
        self.collect_flat(&mut out);
        out
    }

    fn collect_flat<'a>(&'a self, out: &mut Vec<&'a Effect>) {
        match self {
            Effect::And(es) => es.iter().for_each(|e| e.collect_flat(out)),
            other => out.push(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDecl {
    pub name: PddlName,
    /// Defaults to `object` when not written.
    pub parent: PddlName,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateDecl {
    pub name: PddlName,
    pub params: Vec<TypedEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: PddlName,
    pub params: Vec<TypedEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDef {
    pub name: PddlName,
    pub params: Vec<TypedEntry>,
    pub precondition: Option<Condition>,
    pub effect: Option<Effect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PddlDomain {
    pub name: PddlName,
    pub requirements: BTreeSet<Requirement>,
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub functions: Vec<FunctionDecl>,
    pub actions: Vec<ActionDef>,
}

impl PddlDomain {
    pub fn predicate(&self, name: &PddlName) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| &p.name == name)
    }

    pub fn function(&self, name: &PddlName) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| &f.name == name)
    }

    pub fn action(&self, name: &PddlName) -> Option<&ActionDef> {
        self.actions.iter().find(|a| &a.name == name)
    }

    pub fn type_declared(&self, name: &PddlName) -> bool {
        name == &TYPE_OBJECT || self.types.iter().any(|t| &t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionInit {
    pub function: FunctionTerm,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PddlProblem {
    pub name: PddlName,
    pub domain: PddlName,
    pub objects: Vec<TypedEntry>,
    pub init: Vec<Atom>,
    pub init_values: Vec<FunctionInit>,
    pub goal: Condition,
    pub metric: Option<FunctionTerm>,
}

/// Minimal requirement set the domain's own content demands:
/// `:typing` when any type is declared or a non-object type is used,
/// `:action-costs` when functions are declared or an effect increases
/// one, `:negative-preconditions` when a precondition negates an atom.
pub fn infer_requirements(domain: &PddlDomain) -> BTreeSet<Requirement> {
    let mut reqs = BTreeSet::new();

    let object = PddlName::new(TYPE_OBJECT).expect("object is a valid name");
    let uses_typing = !domain.types.is_empty()
        || domain
            .predicates
            .iter()
            .flat_map(|p| &p.params)
            .chain(domain.functions.iter().flat_map(|f| &f.params))
            .chain(domain.actions.iter().flat_map(|a| &a.params))
            .any(|entry| entry.ty != object);
    if uses_typing {
        reqs.insert(Requirement::Typing);
    }

    let uses_costs = !domain.functions.is_empty()
        || domain.actions.iter().any(|a| {
            a.effect
                .as_ref()
                .map(|e| {
                    e.flattened()
                        .iter()
                        .any(|eff| matches!(eff, Effect::Increase { .. }))
                })
                .unwrap_or(false)
        });
    if uses_costs {
        reqs.insert(Requirement::ActionCosts);
    }

    let uses_negation = domain.actions.iter().any(|a| {
        a.precondition
            .as_ref()
            .map(Condition::has_negation)
            .unwrap_or(false)
    });
    if uses_negation {
        reqs.insert(Requirement::NegativePreconditions);
    }

    reqs
}
