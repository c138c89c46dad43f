//! Grounding: from a domain/problem pair to a finite task over
//! interned atoms.
//!
//! Every type-consistent parameter binding of every action becomes a
//! candidate ground action; its cost is the numeric value of its
//! increase effects evaluated against the initial function values
//! (costs are static in this fragment). Candidates whose preconditions
//! are statically impossible — a required atom that is neither
//! initially true nor added by any action, or a forbidden atom that is
//! initially true and never deleted — are dropped; the pruning is
//! conservative, so reachable behavior is unchanged. Atoms stay in the
//! universe even when only static facts mention them.

use crate::diag::{sort_canonical, Diagnostic};
use crate::pddl::{
    ActionDef, Atom, Effect, FunctionTerm, NumericExpr, PddlDomain, PddlProblem, Term, TYPE_OBJECT,
};
use std::collections::{BTreeSet, HashMap};

const RULE_MISSING_VALUE: &str = "ground.missing-function-value";
const RULE_BAD_COST: &str = "ground.bad-cost";
const RULE_TYPE_MISMATCH: &str = "ground.type-mismatch";
const RULE_UNRESOLVED: &str = "ground.unresolved";

#[derive(Debug, Clone, PartialEq)]
pub struct GroundAction {
    /// Action name followed by its bound constants, space-joined.
    pub name: String,
    /// Sorted atom ids that must hold.
    pub pre_pos: Vec<u32>,
    /// Sorted atom ids that must not hold.
    pub pre_neg: Vec<u32>,
    pub add: Vec<u32>,
    /// Disjoint from `add` (an atom both added and deleted stays).
    pub del: Vec<u32>,
    /// Finite and non-negative.
    pub cost: f64,
}

impl GroundAction {
    pub fn display(&self) -> String {
        format!("({})", self.name)
    }

    pub fn applicable(&self, state: &[u32]) -> bool {
        subset(&self.pre_pos, state) && disjoint(&self.pre_neg, state)
    }

    /// Successor state: `(state \ del) ∪ add`.
    pub fn apply(&self, state: &[u32]) -> Box<[u32]> {
        let kept = state
            .iter()
            .copied()
            .filter(|s| self.del.binary_search(s).is_err());
        merge_dedup(kept, self.add.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTask {
    /// Display form of each atom, indexed by atom id.
    pub atoms: Vec<String>,
    /// Sorted by name (case-insensitively).
    pub actions: Vec<GroundAction>,
    /// Sorted atom ids true initially.
    pub init: Box<[u32]>,
    pub goal_pos: Vec<u32>,
    pub goal_neg: Vec<u32>,
}

impl GroundTask {
    pub fn is_goal(&self, state: &[u32]) -> bool {
        subset(&self.goal_pos, state) && disjoint(&self.goal_neg, state)
    }

    /// Index of the action named `name` (case-insensitive; optional
    /// surrounding parentheses and extra whitespace are ignored).
    pub fn action_named(&self, name: &str) -> Option<usize> {
        let t = name.trim();
        let t = t
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .unwrap_or(t);
        let key = t
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_ascii_lowercase();
        self.actions
            .iter()
            .position(|a| a.name.to_ascii_lowercase() == key)
    }
}

/// Both slices sorted: is every element of `a` in `b`?
pub(crate) fn subset(a: &[u32], b: &[u32]) -> bool {
    let mut it = b.iter();
    'outer: for &x in a {
        for &y in it.by_ref() {
            if y == x {
                continue 'outer;
            }
            if y > x {
                return false;
            }
        }
        return false;
    }
    true
}

/// Both slices sorted: no common element?
pub(crate) fn disjoint(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

fn merge_dedup(a: impl Iterator<Item = u32>, b: impl Iterator<Item = u32>) -> Box<[u32]> {
    let mut a = a.peekable();
    let mut b = b.peekable();
    let mut out = Vec::new();
    loop {
        match (a.peek().copied(), b.peek().copied()) {
            (Some(x), Some(y)) if x < y => {
                out.push(x);
                a.next();
            }
            (Some(x), Some(y)) if y < x => {
                out.push(y);
                b.next();
            }
            (Some(x), Some(_)) => {
                out.push(x);
                a.next();
                b.next();
            }
            (Some(x), None) => {
                out.push(x);
                a.next();
            }
            (None, Some(y)) => {
                out.push(y);
                b.next();
            }
            (None, None) => break,
        }
    }
    out.into_boxed_slice()
}

pub fn ground(domain: &PddlDomain, problem: &PddlProblem) -> Result<GroundTask, Vec<Diagnostic>> {
    let mut g = Grounder::new(domain, problem);
    let task = g.run();
    if g.diags.is_empty() {
        Ok(task)
    } else {
        sort_canonical(&mut g.diags);
        Err(g.diags)
    }
}

struct Grounder<'a> {
    domain: &'a PddlDomain,
    problem: &'a PddlProblem,
    diags: Vec<Diagnostic>,
    atom_ids: HashMap<String, u32>,
    atoms: Vec<String>,
    /// object name (lowercase) → its declared type (lowercase)
    object_types: HashMap<String, String>,
    /// type name (lowercase) → objects of it or a subtype, in
    /// declaration order
    objects_by_type: HashMap<String, Vec<String>>,
    /// type name (lowercase) → itself, its parents, …, `object`
    ancestors: HashMap<String, Vec<String>>,
    /// (function, args) lowercase → initial value
    values: HashMap<(String, Vec<String>), f64>,
}

impl<'a> Grounder<'a> {
    fn new(domain: &'a PddlDomain, problem: &'a PddlProblem) -> Self {
        Grounder {
            domain,
            problem,
            diags: Vec::new(),
            atom_ids: HashMap::new(),
            atoms: Vec::new(),
            object_types: HashMap::new(),
            objects_by_type: HashMap::new(),
            ancestors: HashMap::new(),
            values: HashMap::new(),
        }
    }

    fn error(&mut self, rule: &str, message: String) {
        self.diags.push(Diagnostic::error(rule, message));
    }

    fn run(&mut self) -> GroundTask {
        let problem = self.problem;
        let domain = self.domain;
        self.build_type_tables();

        for fi in &problem.init_values {
            self.check_ground_fn(&fi.function);
            let key = (
                fi.function.function.as_str().to_ascii_lowercase(),
                fi.function
                    .terms
                    .iter()
                    .map(|t| t.text().to_ascii_lowercase())
                    .collect(),
            );
            self.values.insert(key, fi.value);
        }

        let mut init_ids: BTreeSet<u32> = BTreeSet::new();
        for atom in &problem.init {
            self.check_ground_atom(atom, "init");
            let args: Vec<String> = atom.terms.iter().map(|t| t.text().to_string()).collect();
            init_ids.insert(self.intern_atom_texts(atom.predicate.as_str(), &args));
        }
        let init: Box<[u32]> = init_ids.iter().copied().collect();

        let mut candidates: Vec<GroundAction> = Vec::new();
        for action in &domain.actions {
            self.ground_action(action, &mut candidates);
        }

        // Static impossibility: drop actions whose preconditions can
        // never be satisfied, judging achievability against the whole
        // candidate set (conservative, hence result-preserving).
        let addable: BTreeSet<u32> = candidates.iter().flat_map(|a| a.add.iter().copied()).collect();
        let deletable: BTreeSet<u32> =
            candidates.iter().flat_map(|a| a.del.iter().copied()).collect();
        let init_set: BTreeSet<u32> = init.iter().copied().collect();
        candidates.retain(|a| {
            let pos_possible = a
                .pre_pos
                .iter()
                .all(|p| init_set.contains(p) || addable.contains(p));
            let neg_possible = a
                .pre_neg
                .iter()
                .all(|n| !init_set.contains(n) || deletable.contains(n));
            pos_possible && neg_possible
        });
        candidates.sort_by(|a, b| {
            (a.name.to_ascii_lowercase(), &a.name).cmp(&(b.name.to_ascii_lowercase(), &b.name))
        });

        let mut goal_pos: BTreeSet<u32> = BTreeSet::new();
        let mut goal_neg: BTreeSet<u32> = BTreeSet::new();
        for (atom, positive) in problem.goal.literals() {
            self.check_ground_atom(atom, "goal");
            let args: Vec<String> = atom.terms.iter().map(|t| t.text().to_string()).collect();
            let id = self.intern_atom_texts(atom.predicate.as_str(), &args);
            if positive {
                goal_pos.insert(id);
            } else {
                goal_neg.insert(id);
            }
        }

        GroundTask {
            atoms: std::mem::take(&mut self.atoms),
            actions: candidates,
            init,
            goal_pos: goal_pos.into_iter().collect(),
            goal_neg: goal_neg.into_iter().collect(),
        }
    }

    fn build_type_tables(&mut self) {
        let mut parent: HashMap<String, String> = HashMap::new();
        for t in &self.domain.types {
            parent.insert(
                t.name.as_str().to_ascii_lowercase(),
                t.parent.as_str().to_ascii_lowercase(),
            );
        }
        let mut ancestors: HashMap<String, Vec<String>> = HashMap::new();
        ancestors.insert(TYPE_OBJECT.to_string(), vec![TYPE_OBJECT.to_string()]);
        for t in parent.keys() {
            let mut chain = vec![t.clone()];
            let mut cursor = t.clone();
            // Parsing guarantees acyclicity; the bound is belt and braces.
            for _ in 0..=parent.len() {
                match parent.get(&cursor) {
                    Some(p) if p.as_str() != TYPE_OBJECT => {
                        chain.push(p.clone());
                        cursor = p.clone();
                    }
                    _ => break,
                }
            }
            chain.push(TYPE_OBJECT.to_string());
            ancestors.insert(t.clone(), chain);
        }
        self.ancestors = ancestors;

        let problem = self.problem;
        for ob in &problem.objects {
            let name_lower = ob.name.to_ascii_lowercase();
            let ty_lower = ob.ty.as_str().to_ascii_lowercase();
            let Some(chain) = self.ancestors.get(&ty_lower).cloned() else {
                self.error(
                    RULE_UNRESOLVED,
                    format!("object `{}` has undeclared type `{}`", ob.name, ob.ty),
                );
                continue;
            };
            self.object_types.insert(name_lower, ty_lower);
            for anc in chain {
                self.objects_by_type
                    .entry(anc)
                    .or_default()
                    .push(ob.name.clone());
            }
        }
    }

    fn intern_atom_texts(&mut self, head: &str, args: &[String]) -> u32 {
        let mut display = String::from("(");
        display.push_str(head);
        for a in args {
            display.push(' ');
            display.push_str(a);
        }
        display.push(')');
        let key = display.to_ascii_lowercase();
        if let Some(&id) = self.atom_ids.get(&key) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.atoms.push(display);
        self.atom_ids.insert(key, id);
        id
    }

    /// Declared-type check for a ground predicate use.
    fn check_ground_atom(&mut self, atom: &Atom, site: &str) {
        let Some(decl) = self.domain.predicate(&atom.predicate) else {
            self.error(
                RULE_UNRESOLVED,
                format!("`{}` is not a declared predicate (in {site})", atom.predicate),
            );
            return;
        };
        if atom.terms.len() != decl.params.len() {
            self.error(
                RULE_UNRESOLVED,
                format!(
                    "`{}` takes {} argument(s), got {} (in {site})",
                    atom.predicate,
                    decl.params.len(),
                    atom.terms.len()
                ),
            );
            return;
        }
        for (term, param) in atom.terms.iter().zip(&decl.params) {
            self.check_object_fits(term.text(), &param.ty.as_str().to_ascii_lowercase(), site, || {
                format!("`{}`", atom.predicate)
            });
        }
    }

    fn check_ground_fn(&mut self, ft: &FunctionTerm) {
        let Some(decl) = self.domain.function(&ft.function) else {
            self.error(
                RULE_UNRESOLVED,
                format!("`{}` is not a declared function (in init)", ft.function),
            );
            return;
        };
        if ft.terms.len() != decl.params.len() {
            self.error(
                RULE_UNRESOLVED,
                format!(
                    "`{}` takes {} argument(s), got {} (in init)",
                    ft.function,
                    decl.params.len(),
                    ft.terms.len()
                ),
            );
            return;
        }
        for (term, param) in ft.terms.iter().zip(&decl.params) {
            self.check_object_fits(term.text(), &param.ty.as_str().to_ascii_lowercase(), "init", || {
                format!("`{}`", ft.function)
            });
        }
    }

    fn check_object_fits(
        &mut self,
        object: &str,
        expected_ty: &str,
        site: &str,
        context: impl Fn() -> String,
    ) {
        let Some(ob_ty) = self.object_types.get(&object.to_ascii_lowercase()) else {
            self.error(
                RULE_UNRESOLVED,
                format!("`{object}` is not a declared object (in {site})"),
            );
            return;
        };
        if expected_ty == TYPE_OBJECT {
            return;
        }
        let fits = self
            .ancestors
            .get(ob_ty)
            .map(|chain| chain.iter().any(|a| a == expected_ty))
            .unwrap_or(false);
        if !fits {
            self.error(
                RULE_TYPE_MISMATCH,
                format!(
                    "{} expects `{expected_ty}` but `{object}` is a `{ob_ty}` (in {site})",
                    context()
                ),
            );
        }
    }

    fn ground_action(&mut self, action: &ActionDef, out: &mut Vec<GroundAction>) {
        // One object list per parameter; an empty list means zero
        // instances for this action.
        let domains: Vec<Vec<String>> = action
            .params
            .iter()
            .map(|p| {
                self.objects_by_type
                    .get(&p.ty.as_str().to_ascii_lowercase())
                    .cloned()
                    .unwrap_or_default()
            })
            .collect();
        if domains.iter().any(|d| d.is_empty()) && !domains.is_empty() {
            return;
        }
        let mut odometer = vec![0usize; domains.len()];
        loop {
            let binding: Vec<&str> = odometer
                .iter()
                .zip(&domains)
                .map(|(&i, objs)| objs[i].as_str())
                .collect();
            self.instantiate(action, &binding, out);

            // Advance; rightmost digit fastest.
            let mut pos = odometer.len();
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                odometer[pos] += 1;
                if odometer[pos] < domains[pos].len() {
                    break;
                }
                odometer[pos] = 0;
            }
        }
    }

    fn instantiate(&mut self, action: &ActionDef, binding: &[&str], out: &mut Vec<GroundAction>) {
        let subst: HashMap<String, String> = action
            .params
            .iter()
            .zip(binding)
            .map(|(p, b)| (p.name.to_ascii_lowercase(), b.to_string()))
            .collect();
        let mut name = action.name.to_string();
        for b in binding {
            name.push(' ');
            name.push_str(b);
        }

        let mut pre_pos: BTreeSet<u32> = BTreeSet::new();
        let mut pre_neg: BTreeSet<u32> = BTreeSet::new();
        if let Some(pre) = &action.precondition {
            for (atom, positive) in pre.literals() {
                let Some(id) = self.instantiate_atom(atom, &subst, &name) else {
                    return;
                };
                if positive {
                    pre_pos.insert(id);
                } else {
                    pre_neg.insert(id);
                }
            }
        }
        // An atom required both true and false can never fire.
        if !pre_pos.is_disjoint(&pre_neg) {
            return;
        }

        let mut add: BTreeSet<u32> = BTreeSet::new();
        let mut del: BTreeSet<u32> = BTreeSet::new();
        let mut cost = 0.0;
        if let Some(effect) = &action.effect {
            for e in effect.flattened() {
                match e {
                    Effect::Add(atom) => {
                        let Some(id) = self.instantiate_atom(atom, &subst, &name) else {
                            return;
                        };
                        add.insert(id);
                    }
                    Effect::Delete(atom) => {
                        let Some(id) = self.instantiate_atom(atom, &subst, &name) else {
                            return;
                        };
                        del.insert(id);
                    }
                    Effect::Increase { amount, .. } => match amount {
                        NumericExpr::Literal(v) => cost += v,
                        NumericExpr::Function(ft) => {
                            let Some(v) = self.value_of(ft, &subst, &name) else {
                                return;
                            };
                            cost += v;
                        }
                    },
                    Effect::And(_) => {}
                }
            }
        }
        // Delete-then-add semantics: an atom in both sets stays true.
        let del: Vec<u32> = del.difference(&add).copied().collect();

        if !cost.is_finite() || cost < 0.0 {
            let shown = crate::pddl::fmt_number(cost);
            self.error(
                RULE_BAD_COST,
                format!("`({name})` has cost {shown}; costs must be finite and non-negative"),
            );
            return;
        }

        out.push(GroundAction {
            name,
            pre_pos: pre_pos.into_iter().collect(),
            pre_neg: pre_neg.into_iter().collect(),
            add: add.into_iter().collect(),
            del,
            cost,
        });
    }

    fn instantiate_atom(
        &mut self,
        atom: &Atom,
        subst: &HashMap<String, String>,
        action: &str,
    ) -> Option<u32> {
        let mut args = Vec::with_capacity(atom.terms.len());
        for term in &atom.terms {
            match term {
                Term::Variable(v) => match subst.get(&v.to_ascii_lowercase()) {
                    Some(obj) => args.push(obj.clone()),
                    None => {
                        self.error(
                            RULE_UNRESOLVED,
                            format!("`{v}` is not bound in `({action})`"),
                        );
                        return None;
                    }
                },
                Term::Constant(c) => args.push(c.as_str().to_string()),
            }
        }
        Some(self.intern_atom_texts(atom.predicate.as_str(), &args))
    }

    fn value_of(
        &mut self,
        ft: &FunctionTerm,
        subst: &HashMap<String, String>,
        action: &str,
    ) -> Option<f64> {
        let mut args = Vec::with_capacity(ft.terms.len());
        for term in &ft.terms {
            match term {
                Term::Variable(v) => match subst.get(&v.to_ascii_lowercase()) {
                    Some(obj) => args.push(obj.to_ascii_lowercase()),
                    None => {
                        self.error(
                            RULE_UNRESOLVED,
                            format!("`{v}` is not bound in `({action})`"),
                        );
                        return None;
                    }
                },
                Term::Constant(c) => args.push(c.as_str().to_ascii_lowercase()),
            }
        }
        let key = (ft.function.as_str().to_ascii_lowercase(), args);
        match self.values.get(&key) {
            Some(&v) => Some(v),
            None => {
                let shown: Vec<String> = std::iter::once(ft.function.to_string())
                    .chain(key.1.iter().cloned())
                    .collect();
                self.error(
                    RULE_MISSING_VALUE,
                    format!(
                        "`({})` has no value in the initial state (needed by `({action})`)",
                        shown.join(" ")
                    ),
                );
                None
            }
        }
    }
}
