//! Deriving PDDL from an annotated model.
//!
//! `compile_domain` turns one Domain-stereotyped package into a
//! `PddlDomain`: Type classes become `:types`, Predicate/Function
//! flows become declarations, and each Action node becomes an
//! `:action` whose precondition collects its incoming predicate flows
//! and whose effect collects its outgoing ones (plus one
//! `(increase (total-cost) ...)` per incoming cost flow).
//! `compile_problem` pairs a compiled domain with externally supplied
//! instance data.
//!
//! Both functions expect input that already passed validation. They
//! still re-check everything the emitted text depends on — names,
//! arities, argument bindings — so a skipped or out-of-date validation
//! run degrades into `compile.*` diagnostics rather than unparseable
//! output: whenever `compile_domain` returns Ok, printing and
//! reparsing the result succeeds.

pub mod instance;

pub use instance::{
    load_instance, FunctionValue, GoalLiteral, GroundAtom, InstanceData, MetricSpec, ObjectDecl,
};

use crate::diag::{sort_canonical, Diagnostic};
use crate::model::{
    Element, ElementId, Flow, ModelGraph, Param, Stereotype, StereotypeApplication, TagValue,
    TAG_ARGUMENTS, TAG_NEGATED, TAG_PARAMETERS, TAG_ROLE,
};
use crate::pddl::{
    fmt_number, infer_requirements, ActionDef, Atom, Condition, Effect, FunctionDecl,
    FunctionInit, FunctionTerm, NumericExpr, PddlDomain, PddlName, PddlProblem, PredicateDecl,
    Term, TypeDecl, TypedEntry, FN_TOTAL_COST, TYPE_OBJECT,
};
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};

const RULE_NOT_A_DOMAIN: &str = "compile.not-a-domain";
const RULE_BAD_NAME: &str = "compile.bad-name";
const RULE_DUPLICATE: &str = "compile.duplicate-name";
const RULE_BAD_TAG: &str = "compile.bad-tag";
const RULE_BAD_ARGUMENT: &str = "compile.bad-argument";
const RULE_SIGNATURE: &str = "compile.signature-conflict";
const RULE_TYPE_PARENT: &str = "compile.type-parent";
const RULE_COST_FLOW: &str = "compile.cost-flow";
const RULE_UNRESOLVED: &str = "compile.unresolved";
const RULE_ARITY: &str = "compile.arity";
const RULE_BAD_NUMBER: &str = "compile.bad-number";
const RULE_CONFLICT: &str = "compile.conflicting-value";
const RULE_METRIC: &str = "compile.metric";
const RULE_EMPTY_GOAL: &str = "compile.empty-goal";

fn object_name() -> PddlName {
    PddlName::new(TYPE_OBJECT).unwrap()
}

fn total_cost_name() -> PddlName {
    PddlName::new(FN_TOTAL_COST).unwrap()
}

fn total_cost_term() -> FunctionTerm {
    FunctionTerm {
        function: total_cost_name(),
        terms: Vec::new(),
    }
}

/// Stands in when a name failed to resolve; a diagnostic is always
/// recorded alongside, so it never reaches emitted output.
fn placeholder_name() -> PddlName {
    PddlName::new("invalid").unwrap()
}

pub fn compile_domain(
    model: &ModelGraph,
    domain: &ElementId,
) -> Result<PddlDomain, Vec<Diagnostic>> {
    let mut c = Compiler {
        model,
        diags: Vec::new(),
        known_types: BTreeSet::new(),
    };
    let compiled = c.domain(domain);
    match compiled {
        Some(d) if c.diags.is_empty() => Ok(d),
        _ => {
            sort_canonical(&mut c.diags);
            Err(c.diags)
        }
    }
}

/// First declaration wins; later uses are checked against it.
struct DeclInfo {
    /// Parameter type references, for detecting conflicting redeclaration.
    sig: Vec<ElementId>,
    params: Vec<TypedEntry>,
}

#[derive(Default)]
struct Decls {
    predicates: BTreeMap<PddlName, DeclInfo>,
    functions: BTreeMap<PddlName, DeclInfo>,
}

/// Identity of a literal or cost term: lowercased head, lowercased
/// argument texts, polarity. Used to fold duplicated flows.
type LiteralKey = (String, Vec<String>, bool);

fn literal_key(head: &PddlName, terms: &[Term], negated: bool) -> LiteralKey {
    (
        head.as_str().to_ascii_lowercase(),
        terms
            .iter()
            .map(|t| t.text().to_ascii_lowercase())
            .collect(),
        negated,
    )
}

struct Compiler<'m> {
    model: &'m ModelGraph,
    diags: Vec<Diagnostic>,
    known_types: BTreeSet<PddlName>,
}

impl<'m> Compiler<'m> {
    fn diag(&mut self, rule: &str, id: &ElementId, message: String) {
        self.diags.push(
            Diagnostic::error(rule, message)
                .at_element(self.model.element_path(id))
                .with_element_id(id.as_str()),
        );
    }

    /// The element's name as a PDDL name, or None (diagnosed).
    fn name_of(&mut self, id: &ElementId) -> Option<PddlName> {
        let el = self.model.element(id)?;
        match PddlName::new(&el.name) {
            Ok(n) => Some(n),
            Err(_) => {
                self.diag(
                    RULE_BAD_NAME,
                    id,
                    format!("`{}` cannot be used as a PDDL name", el.name),
                );
                None
            }
        }
    }

    fn domain(&mut self, id: &ElementId) -> Option<PddlDomain> {
        let model = self.model;
        match model.stereotype_of(id) {
            Ok(Some(app)) if app.stereotype == Stereotype::Domain => {}
            _ => {
                self.diags.push(Diagnostic::error(
                    RULE_NOT_A_DOMAIN,
                    format!("`{id}` is not a Domain-stereotyped package"),
                ));
                return None;
            }
        }
        let name = self.name_of(id).unwrap_or_else(placeholder_name);

        // Types first: parameter types elsewhere must refer back to them.
        let mut named_types: Vec<(ElementId, PddlName)> = Vec::new();
        let mut seen_types: BTreeSet<PddlName> = BTreeSet::new();
        for t in model.types_in_domain(id).unwrap_or_default() {
            let Some(tn) = self.name_of(&t.id) else {
                continue;
            };
            if tn == TYPE_OBJECT {
                self.diag(
                    RULE_BAD_NAME,
                    &t.id,
                    "`object` is the built-in root type and cannot be redeclared".to_string(),
                );
                continue;
            }
            if !seen_types.insert(tn.clone()) {
                self.diag(
                    RULE_DUPLICATE,
                    &t.id,
                    format!("type name `{tn}` is used more than once in this domain"),
                );
                continue;
            }
            named_types.push((t.id.clone(), tn));
        }
        self.known_types = seen_types;
        let mut types: Vec<TypeDecl> = named_types
            .into_iter()
            .map(|(tid, tn)| TypeDecl {
                parent: self.type_parent(&tid),
                name: tn,
            })
            .collect();
        types.sort_by(|a, b| a.name.cmp(&b.name));

        // Declarations: first application of a name fixes its signature.
        let mut decls = Decls::default();
        let mut action_nodes: Vec<(&Element, &StereotypeApplication)> = Vec::new();
        for el in model.members_transitive(id) {
            let app = match model.stereotype_of(&el.id) {
                Ok(Some(a)) => a,
                _ => continue,
            };
            match app.stereotype {
                Stereotype::Predicate => self.declare(&mut decls.predicates, el, app),
                Stereotype::Function => self.declare(&mut decls.functions, el, app),
                Stereotype::Action => action_nodes.push((el, app)),
                Stereotype::Domain | Stereotype::Type => {}
            }
        }
        if let Some(info) = decls.functions.get(&total_cost_name()) {
            if !info.sig.is_empty() {
                self.diags.push(Diagnostic::error(
                    RULE_BAD_NAME,
                    "`total-cost` is reserved for the solution cost and takes no arguments",
                ));
            }
        }

        action_nodes.sort_by(|a, b| {
            (a.0.name.to_ascii_lowercase(), &a.0.id).cmp(&(b.0.name.to_ascii_lowercase(), &b.0.id))
        });
        let mut seen_actions: BTreeSet<PddlName> = BTreeSet::new();
        let mut actions = Vec::new();
        for (el, app) in action_nodes {
            let Some(action) = self.action(el, app, &decls) else {
                continue;
            };
            if !seen_actions.insert(action.name.clone()) {
                self.diag(
                    RULE_DUPLICATE,
                    &el.id,
                    format!(
                        "action name `{}` is used more than once in this domain",
                        action.name
                    ),
                );
                continue;
            }
            actions.push(action);
        }

        let any_cost = actions.iter().any(|a| {
            a.effect
                .iter()
                .flat_map(|e| e.flattened())
                .any(|e| matches!(e, Effect::Increase { .. }))
        });
        let predicates: Vec<PredicateDecl> = decls
            .predicates
            .iter()
            .map(|(n, info)| PredicateDecl {
                name: n.clone(),
                params: info.params.clone(),
            })
            .collect();
        let mut functions: Vec<FunctionDecl> = decls
            .functions
            .iter()
            .map(|(n, info)| FunctionDecl {
                name: n.clone(),
                params: info.params.clone(),
            })
            .collect();
        if any_cost && !decls.functions.contains_key(&total_cost_name()) {
            functions.push(FunctionDecl {
                name: total_cost_name(),
                params: Vec::new(),
            });
            functions.sort_by(|a, b| a.name.cmp(&b.name));
        }

        let mut out = PddlDomain {
            name,
            requirements: BTreeSet::new(),
            types,
            predicates,
            functions,
            actions,
        };
        out.requirements = infer_requirements(&out);
        Some(out)
    }

    /// The single Type-stereotyped parent, defaulting to `object`.
    fn type_parent(&mut self, ty: &ElementId) -> PddlName {
        let model = self.model;
        let parents: Vec<&ElementId> = model
            .generals_of(ty)
            .into_iter()
            .filter(|g| {
                matches!(model.stereotype_of(g), Ok(Some(a)) if a.stereotype == Stereotype::Type)
            })
            .collect();
        if parents.len() > 1 {
            self.diag(
                RULE_TYPE_PARENT,
                ty,
                "a type may have at most one Type parent".to_string(),
            );
            return object_name();
        }
        let Some(parent) = parents.first() else {
            return object_name();
        };
        let Some(pn) = self.name_of(parent) else {
            return object_name();
        };
        if !self.known_types.contains(&pn) {
            self.diag(
                RULE_TYPE_PARENT,
                ty,
                format!("parent type `{pn}` is not a type of this domain"),
            );
            return object_name();
        }
        pn
    }

    fn declare(
        &mut self,
        map: &mut BTreeMap<PddlName, DeclInfo>,
        el: &Element,
        app: &StereotypeApplication,
    ) {
        let Some(name) = self.name_of(&el.id) else {
            return;
        };
        let sig: Vec<ElementId> = app
            .params_tag()
            .map(|ps| ps.iter().map(|p| p.ty.clone()).collect())
            .unwrap_or_default();
        match map.entry(name) {
            Entry::Occupied(existing) => {
                if existing.get().sig != sig {
                    self.diag(
                        RULE_SIGNATURE,
                        &el.id,
                        format!(
                            "`{}` is declared elsewhere with a different signature",
                            el.name
                        ),
                    );
                }
            }
            Entry::Vacant(slot) => {
                let params = self.declared_params(&el.id, app);
                slot.insert(DeclInfo { sig, params });
            }
        }
    }

    /// The `parameters` tag as typed entries; absent means nullary.
    fn declared_params(
        &mut self,
        id: &ElementId,
        app: &StereotypeApplication,
    ) -> Vec<TypedEntry> {
        match (app.tag(TAG_PARAMETERS), app.params_tag()) {
            (None, _) => Vec::new(),
            (Some(_), Some(ps)) => self.typed_params(id, ps),
            (Some(_), None) => {
                self.diag(
                    RULE_BAD_TAG,
                    id,
                    "`parameters` must be a list of { name, type } entries".to_string(),
                );
                Vec::new()
            }
        }
    }

    fn typed_params(&mut self, owner: &ElementId, ps: &[Param]) -> Vec<TypedEntry> {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut out = Vec::with_capacity(ps.len());
        for p in ps {
            if !PddlName::is_valid(&p.name) {
                self.diag(
                    RULE_BAD_NAME,
                    owner,
                    format!("parameter `{}` cannot be used as a PDDL name", p.name),
                );
                continue;
            }
            if !seen.insert(p.name.to_ascii_lowercase()) {
                self.diag(
                    RULE_DUPLICATE,
                    owner,
                    format!("parameter `{}` repeats", p.name),
                );
                continue;
            }
            let ty = self.param_type(owner, &p.ty);
            out.push(TypedEntry::new(format!("?{}", p.name), ty));
        }
        out
    }

    /// Resolves a parameter's type reference to a declared type name.
    fn param_type(&mut self, owner: &ElementId, ty: &ElementId) -> PddlName {
        let Some(el) = self.model.element(ty) else {
            self.diag(
                RULE_UNRESOLVED,
                owner,
                format!("parameter type `{ty}` does not exist"),
            );
            return object_name();
        };
        let Some(name) = self.name_of(&el.id) else {
            return object_name();
        };
        if !self.known_types.contains(&name) && name != TYPE_OBJECT {
            self.diag(
                RULE_UNRESOLVED,
                owner,
                format!("`{name}` is not a type of this domain"),
            );
            return object_name();
        }
        name
    }

    fn action(
        &mut self,
        el: &Element,
        app: &StereotypeApplication,
        decls: &Decls,
    ) -> Option<ActionDef> {
        let name = self.name_of(&el.id)?;
        let params = self.declared_params(&el.id, app);
        let model = self.model;

        let mut pres: Vec<Condition> = Vec::new();
        let mut seen_pre: BTreeSet<LiteralKey> = BTreeSet::new();
        let mut increases: Vec<Effect> = Vec::new();
        let mut seen_inc: BTreeSet<LiteralKey> = BTreeSet::new();
        for (flow, fapp) in model.incoming_annotated_flows(&el.id).unwrap_or_default() {
            match fapp.stereotype {
                Stereotype::Predicate => {
                    let Some(atom) = self.flow_atom(flow, fapp, &params, &decls.predicates)
                    else {
                        continue;
                    };
                    let negated = self.negated_tag(&flow.id, fapp);
                    if seen_pre.insert(literal_key(&atom.predicate, &atom.terms, negated)) {
                        pres.push(if negated {
                            Condition::Not(atom)
                        } else {
                            Condition::Atom(atom)
                        });
                    }
                }
                Stereotype::Function => {
                    self.check_role(&flow.id, fapp);
                    let Some(term) = self.flow_fn_term(flow, fapp, &params, &decls.functions)
                    else {
                        continue;
                    };
                    if seen_inc.insert(literal_key(&term.function, &term.terms, false)) {
                        increases.push(Effect::Increase {
                            target: total_cost_term(),
                            amount: NumericExpr::Function(term),
                        });
                    }
                }
                _ => {}
            }
        }

        let mut effects: Vec<Effect> = Vec::new();
        let mut seen_eff: BTreeSet<LiteralKey> = BTreeSet::new();
        for (flow, fapp) in model.outgoing_annotated_flows(&el.id).unwrap_or_default() {
            match fapp.stereotype {
                Stereotype::Predicate => {
                    let Some(atom) = self.flow_atom(flow, fapp, &params, &decls.predicates)
                    else {
                        continue;
                    };
                    let negated = self.negated_tag(&flow.id, fapp);
                    if seen_eff.insert(literal_key(&atom.predicate, &atom.terms, negated)) {
                        effects.push(if negated {
                            Effect::Delete(atom)
                        } else {
                            Effect::Add(atom)
                        });
                    }
                }
                Stereotype::Function => self.diag(
                    RULE_COST_FLOW,
                    &flow.id,
                    "a cost flow must feed an action, not leave it".to_string(),
                ),
                _ => {}
            }
        }
        effects.extend(increases);

        let precondition = match pres.len() {
            0 => None,
            1 => pres.pop(),
            _ => Some(Condition::And(pres)),
        };
        let effect = match effects.len() {
            0 => None,
            1 => effects.pop(),
            _ => Some(Effect::And(effects)),
        };
        Some(ActionDef {
            name,
            params,
            precondition,
            effect,
        })
    }

    fn flow_atom(
        &mut self,
        flow: &Flow,
        app: &StereotypeApplication,
        action_params: &[TypedEntry],
        decls: &BTreeMap<PddlName, DeclInfo>,
    ) -> Option<Atom> {
        let name = self.name_of(&flow.id)?;
        let terms = self.flow_terms(&flow.id, app, action_params, decls.get(&name))?;
        // The declaration's spelling wins over this flow's.
        let canonical = decls
            .get_key_value(&name)
            .map(|(k, _)| k.clone())
            .unwrap_or(name);
        Some(Atom {
            predicate: canonical,
            terms,
        })
    }

    fn flow_fn_term(
        &mut self,
        flow: &Flow,
        app: &StereotypeApplication,
        action_params: &[TypedEntry],
        decls: &BTreeMap<PddlName, DeclInfo>,
    ) -> Option<FunctionTerm> {
        let name = self.name_of(&flow.id)?;
        let terms = self.flow_terms(&flow.id, app, action_params, decls.get(&name))?;
        let canonical = decls
            .get_key_value(&name)
            .map(|(k, _)| k.clone())
            .unwrap_or(name);
        Some(FunctionTerm {
            function: canonical,
            terms,
        })
    }

    /// Maps the flow's `arguments` tag onto the action's parameters.
    fn flow_terms(
        &mut self,
        flow_id: &ElementId,
        app: &StereotypeApplication,
        action_params: &[TypedEntry],
        decl: Option<&DeclInfo>,
    ) -> Option<Vec<Term>> {
        let args: &[String] = match (app.tag(TAG_ARGUMENTS), app.arguments_tag()) {
            (None, _) => &[],
            (Some(_), Some(a)) => a,
            (Some(_), None) => {
                self.diag(
                    RULE_BAD_TAG,
                    flow_id,
                    "`arguments` must be a list of parameter names".to_string(),
                );
                return None;
            }
        };
        if let Some(info) = decl {
            if args.len() != info.params.len() {
                self.diag(
                    RULE_BAD_TAG,
                    flow_id,
                    format!(
                        "this flow needs {} argument(s) to match its declaration, got {}",
                        info.params.len(),
                        args.len()
                    ),
                );
                return None;
            }
        }
        let mut terms = Vec::with_capacity(args.len());
        let mut ok = true;
        for a in args {
            match action_params
                .iter()
                .find(|p| p.name[1..].eq_ignore_ascii_case(a))
            {
                Some(p) => terms.push(Term::Variable(p.name.clone())),
                None => {
                    self.diag(
                        RULE_BAD_ARGUMENT,
                        flow_id,
                        format!("`{a}` names no parameter of this action"),
                    );
                    ok = false;
                }
            }
        }
        ok.then_some(terms)
    }

    fn negated_tag(&mut self, flow_id: &ElementId, app: &StereotypeApplication) -> bool {
        match app.tag(TAG_NEGATED) {
            None => false,
            Some(TagValue::Str(s)) if s == "true" => true,
            Some(TagValue::Str(s)) if s == "false" => false,
            Some(_) => {
                self.diag(
                    RULE_BAD_TAG,
                    flow_id,
                    "`negated` must be \"true\" or \"false\"".to_string(),
                );
                false
            }
        }
    }

    fn check_role(&mut self, flow_id: &ElementId, app: &StereotypeApplication) {
        match app.tag(TAG_ROLE) {
            None => {}
            Some(TagValue::Str(s)) if s == "cost" => {}
            Some(_) => self.diag(
                RULE_BAD_TAG,
                flow_id,
                "only `role = \"cost\"` cost flows are supported".to_string(),
            ),
        }
    }
}

pub fn compile_problem(
    domain: &PddlDomain,
    data: &InstanceData,
    name: &str,
) -> Result<PddlProblem, Vec<Diagnostic>> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let p_name = PddlName::new(name).unwrap_or_else(|_| {
        diags.push(Diagnostic::error(
            RULE_BAD_NAME,
            format!("`{name}` cannot be used as a problem name"),
        ));
        placeholder_name()
    });

    // Objects keep file order; the author controls grouping.
    let mut objects: Vec<TypedEntry> = Vec::new();
    let mut universe: BTreeSet<PddlName> = BTreeSet::new();
    for ob in &data.objects {
        let Ok(on) = PddlName::new(&ob.name) else {
            diags.push(Diagnostic::error(
                RULE_BAD_NAME,
                format!("`{}` cannot be used as an object name", ob.name),
            ));
            continue;
        };
        let ty = match PddlName::new(&ob.ty) {
            Ok(t) if domain.type_declared(&t) => t,
            _ => {
                diags.push(Diagnostic::error(
                    RULE_UNRESOLVED,
                    format!("object `{}` has unknown type `{}`", ob.name, ob.ty),
                ));
                continue;
            }
        };
        if !universe.insert(on.clone()) {
            diags.push(Diagnostic::error(
                RULE_DUPLICATE,
                format!("object `{on}` is declared twice"),
            ));
            continue;
        }
        objects.push(TypedEntry::new(on.as_str(), ty));
    }

    // Initial facts are a set: sorted, duplicates folded.
    let mut init: Vec<Atom> = data
        .init_predicates
        .iter()
        .filter_map(|ga| resolve_atom(domain, &universe, &ga.predicate, &ga.args, "init", &mut diags))
        .collect();
    init.sort_by_key(atom_key);
    init.dedup();

    let mut values: BTreeMap<(PddlName, Vec<String>), (FunctionTerm, f64)> = BTreeMap::new();
    for fv in &data.init_function_values {
        let Some(term) = resolve_fn_term(domain, &universe, &fv.function, &fv.args, &mut diags)
        else {
            continue;
        };
        if !fv.value.is_finite() {
            diags.push(Diagnostic::error(
                RULE_BAD_NUMBER,
                format!("`{}` needs a finite value", fv.function),
            ));
            continue;
        }
        let key = (
            term.function.clone(),
            term.terms
                .iter()
                .map(|t| t.text().to_ascii_lowercase())
                .collect(),
        );
        match values.entry(key) {
            Entry::Vacant(slot) => {
                slot.insert((term, fv.value));
            }
            Entry::Occupied(existing) => {
                if existing.get().1 != fv.value {
                    let shown: Vec<String> = std::iter::once(term.function.to_string())
                        .chain(term.terms.iter().map(|t| t.text().to_string()))
                        .collect();
                    diags.push(Diagnostic::error(
                        RULE_CONFLICT,
                        format!(
                            "`({})` is assigned both {} and {}",
                            shown.join(" "),
                            fmt_number(existing.get().1),
                            fmt_number(fv.value)
                        ),
                    ));
                }
            }
        }
    }

    let metric = match &data.metric {
        None => None,
        Some(m) => {
            if m.minimize.eq_ignore_ascii_case(FN_TOTAL_COST) && m.args.is_empty() {
                if domain.function(&total_cost_name()).is_some() {
                    Some(total_cost_term())
                } else {
                    diags.push(Diagnostic::error(
                        RULE_METRIC,
                        "the domain declares no `total-cost`; there is nothing to minimize",
                    ));
                    None
                }
            } else {
                diags.push(Diagnostic::error(
                    RULE_METRIC,
                    format!("only `(total-cost)` can be minimized, not `{}`", m.minimize),
                ));
                None
            }
        }
    };
    if metric.is_some() {
        // Cost counting starts at zero unless the instance says otherwise.
        values
            .entry((total_cost_name(), Vec::new()))
            .or_insert_with(|| (total_cost_term(), 0.0));
    }
    let init_values: Vec<FunctionInit> = values
        .into_values()
        .map(|(function, value)| FunctionInit { function, value })
        .collect();

    if data.goal.is_empty() {
        diags.push(Diagnostic::error(
            RULE_EMPTY_GOAL,
            "the goal is empty; nothing would constrain the plan",
        ));
    }
    let mut literals = Vec::with_capacity(data.goal.len());
    for g in &data.goal {
        let Some(atom) = resolve_atom(domain, &universe, &g.predicate, &g.args, "goal", &mut diags)
        else {
            continue;
        };
        literals.push(if g.negated {
            Condition::Not(atom)
        } else {
            Condition::Atom(atom)
        });
    }
    let goal = Condition::And(literals);

    if diags.is_empty() {
        Ok(PddlProblem {
            name: p_name,
            domain: domain.name.clone(),
            objects,
            init,
            init_values,
            goal,
            metric,
        })
    } else {
        sort_canonical(&mut diags);
        Err(diags)
    }
}

fn atom_key(a: &Atom) -> (PddlName, Vec<String>) {
    (
        a.predicate.clone(),
        a.terms
            .iter()
            .map(|t| t.text().to_ascii_lowercase())
            .collect(),
    )
}

fn resolve_atom(
    domain: &PddlDomain,
    universe: &BTreeSet<PddlName>,
    predicate: &str,
    args: &[String],
    site: &str,
    diags: &mut Vec<Diagnostic>,
) -> Option<Atom> {
    let Ok(q) = PddlName::new(predicate) else {
        diags.push(Diagnostic::error(
            RULE_BAD_NAME,
            format!("`{predicate}` cannot be used as a predicate name (in {site})"),
        ));
        return None;
    };
    let Some(decl) = domain.predicate(&q) else {
        diags.push(Diagnostic::error(
            RULE_UNRESOLVED,
            format!(
                "`{q}` is not a predicate of domain `{}` (in {site})",
                domain.name
            ),
        ));
        return None;
    };
    if args.len() != decl.params.len() {
        diags.push(Diagnostic::error(
            RULE_ARITY,
            format!(
                "`{q}` takes {} argument(s), got {} (in {site})",
                decl.params.len(),
                args.len()
            ),
        ));
        return None;
    }
    let terms = ground_terms(universe, args, site, diags)?;
    Some(Atom {
        predicate: decl.name.clone(),
        terms,
    })
}

fn resolve_fn_term(
    domain: &PddlDomain,
    universe: &BTreeSet<PddlName>,
    function: &str,
    args: &[String],
    diags: &mut Vec<Diagnostic>,
) -> Option<FunctionTerm> {
    let Ok(q) = PddlName::new(function) else {
        diags.push(Diagnostic::error(
            RULE_BAD_NAME,
            format!("`{function}` cannot be used as a function name"),
        ));
        return None;
    };
    let Some(decl) = domain.function(&q) else {
        diags.push(Diagnostic::error(
            RULE_UNRESOLVED,
            format!("`{q}` is not a function of domain `{}`", domain.name),
        ));
        return None;
    };
    if args.len() != decl.params.len() {
        diags.push(Diagnostic::error(
            RULE_ARITY,
            format!(
                "`{q}` takes {} argument(s), got {}",
                decl.params.len(),
                args.len()
            ),
        ));
        return None;
    }
    let terms = ground_terms(universe, args, "init", diags)?;
    Some(FunctionTerm {
        function: decl.name.clone(),
        terms,
    })
}

/// Every argument must be a declared object; spelling follows the
/// declaration.
fn ground_terms(
    universe: &BTreeSet<PddlName>,
    args: &[String],
    site: &str,
    diags: &mut Vec<Diagnostic>,
) -> Option<Vec<Term>> {
    let mut terms = Vec::with_capacity(args.len());
    let mut ok = true;
    for a in args {
        let declared = PddlName::new(a).ok().and_then(|q| universe.get(&q));
        match declared {
            Some(d) => terms.push(Term::Constant(d.clone())),
            None => {
                diags.push(Diagnostic::error(
                    RULE_UNRESOLVED,
                    format!("`{a}` is not a declared object (in {site})"),
                ));
                ok = false;
            }
        }
    }
    ok.then_some(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ElementKind;
    use crate::pddl::{parse_domain, parse_problem, print_domain, print_problem, Requirement};
    use crate::testutil::{arguments, params, tiny_domain, ModelBuilder};
    use crate::validate::{validate, RuleSet};

    fn compile_tiny() -> PddlDomain {
        let model = tiny_domain().build().unwrap();
        compile_domain(&model, &"pkg-d".into()).unwrap()
    }

    #[test]
    fn tiny_domain_compiles_and_reparses() {
        let d = compile_tiny();
        assert_eq!(d.name, "workcell");
        assert_eq!(d.types.len(), 1);
        assert_eq!(d.types[0].name, "Item");
        assert_eq!(d.types[0].parent, "object");
        // Declarations are sorted by name.
        let preds: Vec<&str> = d.predicates.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(preds, ["Done", "Ready"]);
        let fns: Vec<&str> = d.functions.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(fns, ["Effort", "total-cost"]);
        assert_eq!(
            d.requirements,
            BTreeSet::from([Requirement::Typing, Requirement::ActionCosts])
        );

        let work = d.action(&PddlName::new("Work").unwrap()).unwrap();
        assert_eq!(work.params, [TypedEntry::new("?x", PddlName::new("Item").unwrap())]);
        let pre = work.precondition.as_ref().unwrap();
        assert_eq!(pre.literals().len(), 1);
        assert_eq!(pre.literals()[0].0.predicate, "Ready");
        let effects = work.effect.as_ref().unwrap().flattened();
        assert_eq!(effects.len(), 2);
        assert!(matches!(effects[0], Effect::Add(a) if a.predicate == "Done"));
        assert!(matches!(
            effects[1],
            Effect::Increase { target, amount: NumericExpr::Function(f) }
                if target.function == "total-cost" && f.function == "Effort"
        ));

        let reparsed = parse_domain(&print_domain(&d)).unwrap();
        assert_eq!(reparsed, d);
    }

    #[test]
    fn compilation_is_deterministic() {
        let a = print_domain(&compile_tiny());
        let b = print_domain(&compile_tiny());
        assert_eq!(a, b);
    }

    /// One flow between two actions serves both sides: an add effect
    /// for the source, a precondition for the target.
    #[test]
    fn action_to_action_flow_lands_on_both_sides() {
        let model = tiny_domain()
            .action("a-next", "Finish", "act")
            .apply_tagged(
                "a-next",
                Stereotype::Action,
                vec![("parameters", params(&[("x", "ty-item")]))],
            )
            .flow("f-handoff", "act", "Staged", "a-work", "a-next")
            .apply_tagged(
                "f-handoff",
                Stereotype::Predicate,
                vec![
                    ("parameters", params(&[("i", "ty-item")])),
                    ("arguments", arguments(&["x"])),
                ],
            )
            .build()
            .unwrap();
        let d = compile_domain(&model, &"pkg-d".into()).unwrap();

        let work = d.action(&PddlName::new("Work").unwrap()).unwrap();
        let adds: Vec<&str> = work
            .effect
            .as_ref()
            .unwrap()
            .flattened()
            .iter()
            .filter_map(|e| match e {
                Effect::Add(a) => Some(a.predicate.as_str()),
                _ => None,
            })
            .collect();
        assert!(adds.contains(&"Staged"));

        let finish = d.action(&PddlName::new("Finish").unwrap()).unwrap();
        let pre = finish.precondition.as_ref().unwrap();
        assert_eq!(pre.literals().len(), 1);
        assert_eq!(pre.literals()[0].0.predicate, "Staged");
        assert_eq!(pre.literals()[0].0.terms, [Term::Variable("?x".into())]);

        // Exactly one declaration despite two adjacent actions.
        assert_eq!(
            d.predicates.iter().filter(|p| p.name == "Staged").count(),
            1
        );
    }

    #[test]
    fn negated_flows_become_deletes_and_negative_preconditions() {
        let model = tiny_domain()
            .flow("f-raw", "act", "Raw", "act", "a-work")
            .apply_tagged(
                "f-raw",
                Stereotype::Predicate,
                vec![
                    ("parameters", params(&[("i", "ty-item")])),
                    ("arguments", arguments(&["x"])),
                    ("negated", TagValue::Str("true".into())),
                ],
            )
            .flow("f-used", "act", "Ready", "a-work", "act")
            .apply_tagged(
                "f-used",
                Stereotype::Predicate,
                vec![
                    ("parameters", params(&[("i", "ty-item")])),
                    ("arguments", arguments(&["x"])),
                    ("negated", TagValue::Str("true".into())),
                ],
            )
            .build()
            .unwrap();
        let d = compile_domain(&model, &"pkg-d".into()).unwrap();
        assert!(d.requirements.contains(&Requirement::NegativePreconditions));

        let work = d.action(&PddlName::new("Work").unwrap()).unwrap();
        let negs: Vec<&str> = work
            .precondition
            .as_ref()
            .unwrap()
            .literals()
            .iter()
            .filter(|(_, positive)| !positive)
            .map(|(a, _)| a.predicate.as_str())
            .collect();
        assert_eq!(negs, ["Raw"]);
        let deletes: Vec<&str> = work
            .effect
            .as_ref()
            .unwrap()
            .flattened()
            .iter()
            .filter_map(|e| match e {
                Effect::Delete(a) => Some(a.predicate.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(deletes, ["Ready"]);

        let reparsed = parse_domain(&print_domain(&d)).unwrap();
        assert_eq!(reparsed, d);
    }

    /// Duplicate flows (same predicate, same arguments, same polarity)
    /// fold into one literal; the first flow's position wins.
    #[test]
    fn duplicated_flows_fold() {
        let model = tiny_domain()
            .flow("f-ready2", "act", "Ready", "act", "a-work")
            .apply_tagged(
                "f-ready2",
                Stereotype::Predicate,
                vec![
                    ("parameters", params(&[("i", "ty-item")])),
                    ("arguments", arguments(&["x"])),
                ],
            )
            .flow("f-effort2", "act", "Effort", "act", "a-work")
            .apply_tagged(
                "f-effort2",
                Stereotype::Function,
                vec![
                    ("parameters", params(&[("i", "ty-item")])),
                    ("arguments", arguments(&["x"])),
                ],
            )
            .build()
            .unwrap();
        let d = compile_domain(&model, &"pkg-d".into()).unwrap();
        let work = d.action(&PddlName::new("Work").unwrap()).unwrap();
        assert_eq!(work.precondition.as_ref().unwrap().literals().len(), 1);
        let increases = work
            .effect
            .as_ref()
            .unwrap()
            .flattened()
            .iter()
            .filter(|e| matches!(e, Effect::Increase { .. }))
            .count();
        assert_eq!(increases, 1);
    }

    #[test]
    fn domain_without_actions_is_valid_output() {
        let model = ModelBuilder::new()
            .package("pkg", "bare", None)
            .apply("pkg", Stereotype::Domain)
            .class("ty", "Thing", "pkg")
            .apply("ty", Stereotype::Type)
            .build()
            .unwrap();
        let d = compile_domain(&model, &"pkg".into()).unwrap();
        assert!(d.actions.is_empty());
        assert!(d.predicates.is_empty());
        assert!(d.functions.is_empty());
        let reparsed = parse_domain(&print_domain(&d)).unwrap();
        assert_eq!(reparsed, d);
    }

    #[test]
    fn type_parents_follow_generalizations() {
        let model = ModelBuilder::new()
            .package("pkg", "cell", None)
            .apply("pkg", Stereotype::Domain)
            .class("ty-base", "Equipment", "pkg")
            .apply("ty-base", Stereotype::Type)
            .class("ty-tool", "Tool", "pkg")
            .apply("ty-tool", Stereotype::Type)
            .generalize("ty-tool", "ty-base")
            .build()
            .unwrap();
        let d = compile_domain(&model, &"pkg".into()).unwrap();
        let tool = d.types.iter().find(|t| t.name == "Tool").unwrap();
        assert_eq!(tool.parent, "Equipment");
        let base = d.types.iter().find(|t| t.name == "Equipment").unwrap();
        assert_eq!(base.parent, "object");
        let reparsed = parse_domain(&print_domain(&d)).unwrap();
        assert_eq!(reparsed, d);
    }

    #[test]
    fn every_model_declaration_appears_exactly_once() {
        let model = tiny_domain().build().unwrap();
        let d = compile_domain(&model, &"pkg-d".into()).unwrap();
        // Predicate applications: Ready, Done. Function: Effort.
        // Actions: Work. Each exactly once.
        assert_eq!(d.predicates.len(), 2);
        assert_eq!(d.actions.len(), 1);
        assert_eq!(
            d.functions.iter().filter(|f| f.name != "total-cost").count(),
            1
        );
    }

    #[test]
    fn unknown_argument_name_is_reported() {
        let model = tiny_domain()
            .flow("f-bad", "act", "Extra", "act", "a-work")
            .apply_tagged(
                "f-bad",
                Stereotype::Predicate,
                vec![
                    ("parameters", params(&[("i", "ty-item")])),
                    ("arguments", arguments(&["ghost"])),
                ],
            )
            .build()
            .unwrap();
        let diags = compile_domain(&model, &"pkg-d".into()).unwrap_err();
        assert!(diags.iter().any(|d| d.rule == "compile.bad-argument"));
        assert!(diags.iter().any(|d| d.message.contains("ghost")));
    }

    #[test]
    fn argument_count_must_match_declaration() {
        let model = tiny_domain()
            .flow("f-short", "act", "Ready", "act", "a-work")
            .apply_tagged(
                "f-short",
                Stereotype::Predicate,
                vec![("parameters", params(&[("i", "ty-item")]))],
            )
            .build()
            .unwrap();
        let diags = compile_domain(&model, &"pkg-d".into()).unwrap_err();
        assert!(diags.iter().any(|d| d.rule == "compile.bad-tag"));
    }

    #[test]
    fn foreign_type_reference_is_reported() {
        let model = tiny_domain()
            .package("pkg-other", "elsewhere", None)
            .apply("pkg-other", Stereotype::Domain)
            .class("ty-foreign", "Alien", "pkg-other")
            .apply("ty-foreign", Stereotype::Type)
            .action("a-bad", "Import", "act")
            .apply_tagged(
                "a-bad",
                Stereotype::Action,
                vec![("parameters", params(&[("y", "ty-foreign")]))],
            )
            .build()
            .unwrap();
        let diags = compile_domain(&model, &"pkg-d".into()).unwrap_err();
        assert!(diags.iter().any(|d| d.rule == "compile.unresolved"));
    }

    #[test]
    fn cost_flow_leaving_an_action_is_reported() {
        let model = tiny_domain()
            .flow("f-out", "act", "Yield", "a-work", "act")
            .apply_tagged(
                "f-out",
                Stereotype::Function,
                vec![
                    ("parameters", params(&[("i", "ty-item")])),
                    ("arguments", arguments(&["x"])),
                ],
            )
            .build()
            .unwrap();
        let diags = compile_domain(&model, &"pkg-d".into()).unwrap_err();
        assert!(diags.iter().any(|d| d.rule == "compile.cost-flow"));
    }

    #[test]
    fn non_domain_target_is_rejected() {
        let model = tiny_domain().build().unwrap();
        let diags = compile_domain(&model, &"act".into()).unwrap_err();
        assert_eq!(diags[0].rule, "compile.not-a-domain");
        let diags = compile_domain(&model, &"nowhere".into()).unwrap_err();
        assert_eq!(diags[0].rule, "compile.not-a-domain");
    }

    #[test]
    fn duplicate_action_names_are_reported() {
        let model = tiny_domain()
            .action("a-work2", "work", "act")
            .apply_tagged(
                "a-work2",
                Stereotype::Action,
                vec![("parameters", params(&[("x", "ty-item")]))],
            )
            .build()
            .unwrap();
        let diags = compile_domain(&model, &"pkg-d".into()).unwrap_err();
        assert!(diags.iter().any(|d| d.rule == "compile.duplicate-name"));
    }

    /// Everything the modeling rules accept must compile, and the
    /// output must survive a print/parse round trip.
    #[test]
    fn validated_variants_compile_and_reparse() {
        let variants: Vec<ModelBuilder> = vec![
            tiny_domain(),
            tiny_domain()
                .class("ty-sub", "SpecialItem", "pkg-d")
                .apply("ty-sub", Stereotype::Type)
                .generalize("ty-sub", "ty-item"),
            tiny_domain()
                .element("grp", ElementKind::Package, "nested", Some("pkg-d"))
                .class("ty-extra", "Widget", "grp")
                .apply("ty-extra", Stereotype::Type),
        ];
        for (i, v) in variants.into_iter().enumerate() {
            let model = v.build().unwrap();
            let findings = validate(&model, &RuleSet::generation());
            assert!(findings.is_empty(), "variant {i}: {findings:?}");
            let d = compile_domain(&model, &"pkg-d".into()).unwrap();
            let reparsed = parse_domain(&print_domain(&d)).unwrap();
            assert_eq!(reparsed, d, "variant {i}");
        }
    }

    fn sample_instance() -> InstanceData {
        InstanceData {
            objects: vec![
                ObjectDecl {
                    name: "widget".into(),
                    ty: "Item".into(),
                },
                ObjectDecl {
                    name: "gizmo".into(),
                    ty: "Item".into(),
                },
            ],
            init_predicates: vec![
                GroundAtom {
                    predicate: "Ready".into(),
                    args: vec!["widget".into()],
                },
                GroundAtom {
                    predicate: "Ready".into(),
                    args: vec!["gizmo".into()],
                },
                // Duplicate of the first; must fold away.
                GroundAtom {
                    predicate: "ready".into(),
                    args: vec!["WIDGET".into()],
                },
            ],
            init_function_values: vec![
                FunctionValue {
                    function: "Effort".into(),
                    args: vec!["widget".into()],
                    value: 2.0,
                },
                FunctionValue {
                    function: "Effort".into(),
                    args: vec!["gizmo".into()],
                    value: 3.0,
                },
            ],
            goal: vec![GoalLiteral {
                predicate: "Done".into(),
                args: vec!["widget".into()],
                negated: false,
            }],
            metric: Some(MetricSpec {
                minimize: "total-cost".into(),
                args: vec![],
            }),
        }
    }

    #[test]
    fn problem_compiles_sorted_and_reparses() {
        let d = compile_tiny();
        let p = compile_problem(&d, &sample_instance(), "bench").unwrap();
        assert_eq!(p.name, "bench");
        assert_eq!(p.domain, "workcell");
        // File order for objects, sorted set for init.
        let names: Vec<&str> = p.objects.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["widget", "gizmo"]);
        let init: Vec<String> = p
            .init
            .iter()
            .map(|a| format!("{} {}", a.predicate, a.terms[0].text()))
            .collect();
        assert_eq!(init, ["Ready gizmo", "Ready widget"]);
        // Metric minimization starts the counter at zero.
        let tc = p
            .init_values
            .iter()
            .find(|v| v.function.function == "total-cost")
            .unwrap();
        assert_eq!(tc.value, 0.0);
        assert_eq!(p.init_values.len(), 3);
        // Goals always sit inside a conjunction.
        assert!(matches!(&p.goal, Condition::And(ls) if ls.len() == 1));

        let reparsed = parse_problem(&print_problem(&p), &d).unwrap();
        assert_eq!(reparsed, p);
    }

    #[test]
    fn explicit_total_cost_start_is_kept() {
        let d = compile_tiny();
        let mut data = sample_instance();
        data.init_function_values.push(FunctionValue {
            function: "total-cost".into(),
            args: vec![],
            value: 7.0,
        });
        let p = compile_problem(&d, &data, "bench").unwrap();
        let tc = p
            .init_values
            .iter()
            .find(|v| v.function.function == "total-cost")
            .unwrap();
        assert_eq!(tc.value, 7.0);
    }

    #[test]
    fn empty_goal_is_rejected() {
        let d = compile_tiny();
        let mut data = sample_instance();
        data.goal.clear();
        let diags = compile_problem(&d, &data, "bench").unwrap_err();
        assert!(diags.iter().any(|x| x.rule == "compile.empty-goal"));
    }

    #[test]
    fn unresolved_references_are_reported_individually() {
        let d = compile_tiny();
        let mut data = sample_instance();
        data.objects.push(ObjectDecl {
            name: "rock".into(),
            ty: "Mineral".into(),
        });
        data.init_predicates.push(GroundAtom {
            predicate: "Shiny".into(),
            args: vec![],
        });
        data.init_predicates.push(GroundAtom {
            predicate: "Ready".into(),
            args: vec!["nobody".into()],
        });
        data.init_predicates.push(GroundAtom {
            predicate: "Ready".into(),
            args: vec![],
        });
        let diags = compile_problem(&d, &data, "bench").unwrap_err();
        let rules: Vec<&str> = diags.iter().map(|x| x.rule.as_str()).collect();
        assert_eq!(
            rules
                .iter()
                .filter(|r| **r == "compile.unresolved")
                .count(),
            3,
            "{diags:?}"
        );
        assert!(rules.contains(&"compile.arity"));
    }

    #[test]
    fn conflicting_init_values_are_reported() {
        let d = compile_tiny();
        let mut data = sample_instance();
        data.init_function_values.push(FunctionValue {
            function: "effort".into(),
            args: vec!["WIDGET".into()],
            value: 9.0,
        });
        let diags = compile_problem(&d, &data, "bench").unwrap_err();
        assert!(diags
            .iter()
            .any(|x| x.rule == "compile.conflicting-value" && x.message.contains("widget")));
        // An identical restatement is not a conflict.
        let mut data = sample_instance();
        data.init_function_values.push(FunctionValue {
            function: "EFFORT".into(),
            args: vec!["Widget".into()],
            value: 2.0,
        });
        let p = compile_problem(&d, &data, "bench").unwrap();
        assert_eq!(p.init_values.len(), 3);
    }

    #[test]
    fn metric_must_be_total_cost_and_declared() {
        let d = compile_tiny();
        let mut data = sample_instance();
        data.metric = Some(MetricSpec {
            minimize: "Effort".into(),
            args: vec!["widget".into()],
        });
        let diags = compile_problem(&d, &data, "bench").unwrap_err();
        assert!(diags.iter().any(|x| x.rule == "compile.metric"));

        // A domain with no costs has no total-cost to minimize.
        let bare = ModelBuilder::new()
            .package("pkg", "bare", None)
            .apply("pkg", Stereotype::Domain)
            .class("ty", "Item", "pkg")
            .apply("ty", Stereotype::Type)
            .activity("act", "Flow", "pkg")
            .action("a", "Touch", "act")
            .apply_tagged(
                "a",
                Stereotype::Action,
                vec![("parameters", params(&[("x", "ty")]))],
            )
            .flow("f-t", "act", "Touched", "a", "act")
            .apply_tagged(
                "f-t",
                Stereotype::Predicate,
                vec![
                    ("parameters", params(&[("i", "ty")])),
                    ("arguments", arguments(&["x"])),
                ],
            )
            .build()
            .unwrap();
        let plain = compile_domain(&bare, &"pkg".into()).unwrap();
        let mut data = InstanceData {
            objects: vec![ObjectDecl {
                name: "w".into(),
                ty: "Item".into(),
            }],
            init_predicates: vec![],
            init_function_values: vec![],
            goal: vec![GoalLiteral {
                predicate: "Touched".into(),
                args: vec!["w".into()],
                negated: false,
            }],
            metric: Some(MetricSpec {
                minimize: "total-cost".into(),
                args: vec![],
            }),
        };
        let diags = compile_problem(&plain, &data, "p").unwrap_err();
        assert!(diags.iter().any(|x| x.rule == "compile.metric"));
        data.metric = None;
        assert!(compile_problem(&plain, &data, "p").is_ok());
    }

    #[test]
    fn negated_goal_literal_round_trips() {
        let d = compile_tiny();
        let mut data = sample_instance();
        data.goal.push(GoalLiteral {
            predicate: "Ready".into(),
            args: vec!["widget".into()],
            negated: true,
        });
        let p = compile_problem(&d, &data, "bench").unwrap();
        assert!(p.goal.has_negation());
        let reparsed = parse_problem(&print_problem(&p), &d).unwrap();
        assert_eq!(reparsed, p);
    }
}
