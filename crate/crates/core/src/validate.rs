//! Model validation: the planning-profile well-formedness rules.
//!
//! Each rule has a stable identifier (`P01`…`P10`) so rule sets can be
//! selected per run. `RuleSet::modeling` covers everything a model
//! must satisfy to be meaningful; `RuleSet::generation` adds the
//! checks that only matter when PDDL files are about to be written.
//!
//! Per-domain uniqueness rules (P02–P05) report one diagnostic per
//! domain listing every offending name, so a modeler sees the whole
//! collision set at once instead of one pair per run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::diag::{self, Diagnostic};
use crate::model::ModelGraph;
use crate::model::{
    Element, ElementId, ElementKind, Param, Stereotype, StereotypeApplication, TagValue,
    TAG_ARGUMENTS, TAG_NEGATED, TAG_PARAMETERS, TAG_ROLE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    P01,
    P02,
    P03,
    P04,
    P05,
    P06,
    P07,
    P08,
    P09,
    P10,
}

impl RuleId {
    pub const ALL: [RuleId; 10] = [
        RuleId::P01,
        RuleId::P02,
        RuleId::P03,
        RuleId::P04,
        RuleId::P05,
        RuleId::P06,
        RuleId::P07,
        RuleId::P08,
        RuleId::P09,
        RuleId::P10,
    ];

    pub fn description(self) -> &'static str {
        match self {
            RuleId::P01 => "domain names are identifiers (letters, digits, `_`)",
            RuleId::P02 => "type names are unique within a domain",
            RuleId::P03 => "predicate uses agree on one signature",
            RuleId::P04 => "function uses agree on one signature and do not collide with predicates",
            RuleId::P05 => "action names are unique within a domain",
            RuleId::P06 => "action parameters are well-formed",
            RuleId::P07 => "flow annotations are well-formed and match adjacent actions",
            RuleId::P08 => "type generalizations form a single-parent, acyclic, domain-local forest",
            RuleId::P09 => "planning names use PDDL name syntax and avoid reserved words",
            RuleId::P10 => "at least one package is annotated as a domain",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{:02}", *self as u8 + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rule `{0}` (expected P01..P10)")]
pub struct UnknownRule(pub String);

impl FromStr for RuleId {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.trim().to_ascii_uppercase();
        RuleId::ALL
            .iter()
            .copied()
            .find(|r| r.to_string() == normalized)
            .ok_or_else(|| UnknownRule(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet(BTreeSet<RuleId>);

impl RuleSet {
    /// P01–P09: everything a model must satisfy on its own.
    pub fn modeling() -> Self {
        RuleSet(RuleId::ALL[..9].iter().copied().collect())
    }

    /// All rules, including those that only matter for generation.
    pub fn generation() -> Self {
        RuleSet(RuleId::ALL.iter().copied().collect())
    }

    pub fn from_ids(ids: impl IntoIterator<Item = RuleId>) -> Self {
        RuleSet(ids.into_iter().collect())
    }

    pub fn contains(&self, rule: RuleId) -> bool {
        self.0.contains(&rule)
    }

    pub fn iter(&self) -> impl Iterator<Item = RuleId> + '_ {
        self.0.iter().copied()
    }
}

fn pddl_name_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new("^[A-Za-z][A-Za-z0-9_-]*$").expect("valid pattern"))
}

fn domain_name_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new("^[A-Za-z][A-Za-z0-9_]*$").expect("valid pattern"))
}

pub fn validate(model: &ModelGraph, rules: &RuleSet) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let v = Validator { model };
    if rules.contains(RuleId::P01) {
        v.p01(&mut diags);
    }
    if rules.contains(RuleId::P02) {
        v.p02(&mut diags);
    }
    if rules.contains(RuleId::P03) {
        v.p03(&mut diags);
    }
    if rules.contains(RuleId::P04) {
        v.p04(&mut diags);
    }
    if rules.contains(RuleId::P05) {
        v.p05(&mut diags);
    }
    if rules.contains(RuleId::P06) {
        v.p06(&mut diags);
    }
    if rules.contains(RuleId::P07) {
        v.p07(&mut diags);
    }
    if rules.contains(RuleId::P08) {
        v.p08(&mut diags);
    }
    if rules.contains(RuleId::P09) {
        v.p09(&mut diags);
    }
    if rules.contains(RuleId::P10) {
        v.p10(&mut diags);
    }
    diag::sort_canonical(&mut diags);
    diags
}

struct Validator<'a> {
    model: &'a ModelGraph,
}

impl Validator<'_> {
    fn diag(&self, rule: RuleId, element: &ElementId, message: String) -> Diagnostic {
        Diagnostic::error(&rule.to_string(), message)
            .at_element(self.model.element_path(element))
            .with_element_id(element.as_str())
    }

    fn display_name<'b>(&self, el: &'b Element) -> &'b str {
        if el.name.is_empty() {
            el.id.as_str()
        } else {
            &el.name
        }
    }

    /// Elements inside `domain` carrying `stereotype`, in id order.
    fn annotated_members(
        &self,
        domain: &ElementId,
        stereotype: Stereotype,
    ) -> Vec<(&Element, &StereotypeApplication)> {
        self.model
            .members_transitive(domain)
            .into_iter()
            .filter_map(|el| {
                self.model
                    .stereotype_of(&el.id)
                    .ok()
                    .flatten()
                    .filter(|app| app.stereotype == stereotype)
                    .map(|app| (el, app))
            })
            .collect()
    }

    fn applications_of(&self, stereotype: Stereotype) -> Vec<(&Element, &StereotypeApplication)> {
        self.model
            .applications()
            .filter(|app| app.stereotype == stereotype)
            .filter_map(|app| self.model.element(&app.element).map(|el| (el, app)))
            .collect()
    }

    fn has_type_stereotype(&self, id: &ElementId) -> bool {
        matches!(
            self.model.stereotype_of(id),
            Ok(Some(app)) if app.stereotype == Stereotype::Type
        )
    }

    /// Case-insensitive duplicate scan; returns the offending names in
    /// sorted order, one entry per name.
    fn duplicated_names<'b>(names: impl Iterator<Item = &'b str>) -> Vec<String> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for name in names {
            *counts.entry(name.to_ascii_lowercase()).or_default() += 1;
        }
        counts
            .into_iter()
            .filter(|(_, n)| *n > 1)
            .map(|(name, _)| name)
            .collect()
    }

    fn backticked(names: &[String]) -> String {
        names
            .iter()
            .map(|n| format!("`{n}`"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn p01(&self, diags: &mut Vec<Diagnostic>) {
        for domain in self.model.domains() {
            if !domain_name_re().is_match(&domain.name) {
                diags.push(self.diag(
                    RuleId::P01,
                    &domain.id,
                    format!(
                        "domain name `{}` must start with a letter and use only letters, digits and `_`",
                        domain.name
                    ),
                ));
            }
        }
    }

    fn p02(&self, diags: &mut Vec<Diagnostic>) {
        for domain in self.model.domains() {
            let types = self.annotated_members(&domain.id, Stereotype::Type);
            let dups = Self::duplicated_names(types.iter().map(|(el, _)| el.name.as_str()));
            if !dups.is_empty() {
                diags.push(self.diag(
                    RuleId::P02,
                    &domain.id,
                    format!(
                        "type names declared more than once in domain `{}`: {}",
                        domain.name,
                        Self::backticked(&dups)
                    ),
                ));
            }
        }
    }

    /// The declared signature of an annotated flow: the `parameters`
    /// type refs. Malformed tags read as empty here; P07 reports them.
    fn signature(app: &StereotypeApplication) -> Vec<&ElementId> {
        app.params_tag()
            .map(|ps| ps.iter().map(|p| &p.ty).collect())
            .unwrap_or_default()
    }

    fn conflicting_signatures(&self, domain: &ElementId, stereotype: Stereotype) -> Vec<String> {
        let mut groups: BTreeMap<String, Vec<&StereotypeApplication>> = BTreeMap::new();
        for (el, app) in self.annotated_members(domain, stereotype) {
            groups
                .entry(el.name.to_ascii_lowercase())
                .or_default()
                .push(app);
        }
        groups
            .into_iter()
            .filter(|(_, apps)| {
                let first = Self::signature(apps[0]);
                apps[1..].iter().any(|app| Self::signature(app) != first)
            })
            .map(|(name, _)| name)
            .collect()
    }

    fn p03(&self, diags: &mut Vec<Diagnostic>) {
        for domain in self.model.domains() {
            let conflicted = self.conflicting_signatures(&domain.id, Stereotype::Predicate);
            if !conflicted.is_empty() {
                diags.push(self.diag(
                    RuleId::P03,
                    &domain.id,
                    format!(
                        "predicate signatures disagree in domain `{}`: {}",
                        domain.name,
                        Self::backticked(&conflicted)
                    ),
                ));
            }
        }
    }

    fn p04(&self, diags: &mut Vec<Diagnostic>) {
        for domain in self.model.domains() {
            let conflicted = self.conflicting_signatures(&domain.id, Stereotype::Function);
            if !conflicted.is_empty() {
                diags.push(self.diag(
                    RuleId::P04,
                    &domain.id,
                    format!(
                        "function signatures disagree in domain `{}`: {}",
                        domain.name,
                        Self::backticked(&conflicted)
                    ),
                ));
            }
            let predicate_names: BTreeSet<String> = self
                .annotated_members(&domain.id, Stereotype::Predicate)
                .iter()
                .map(|(el, _)| el.name.to_ascii_lowercase())
                .collect();
            let function_names: BTreeSet<String> = self
                .annotated_members(&domain.id, Stereotype::Function)
                .iter()
                .map(|(el, _)| el.name.to_ascii_lowercase())
                .collect();
            let shared: Vec<String> = predicate_names
                .intersection(&function_names)
                .cloned()
                .collect();
            if !shared.is_empty() {
                diags.push(self.diag(
                    RuleId::P04,
                    &domain.id,
                    format!(
                        "names used for both a predicate and a function in domain `{}`: {}",
                        domain.name,
                        Self::backticked(&shared)
                    ),
                ));
            }
        }
    }

    fn p05(&self, diags: &mut Vec<Diagnostic>) {
        for domain in self.model.domains() {
            let actions = self.annotated_members(&domain.id, Stereotype::Action);
            let dups = Self::duplicated_names(actions.iter().map(|(el, _)| el.name.as_str()));
            if !dups.is_empty() {
                diags.push(self.diag(
                    RuleId::P05,
                    &domain.id,
                    format!(
                        "action names declared more than once in domain `{}`: {}",
                        domain.name,
                        Self::backticked(&dups)
                    ),
                ));
            }
        }
    }

    /// Shared by P06 (actions) and P07 (flows): checks the
    /// `parameters` tag and returns its entries best-effort.
    fn check_params_tag(
        &self,
        el: &Element,
        app: &StereotypeApplication,
        rule: RuleId,
        diags: &mut Vec<Diagnostic>,
    ) -> Vec<Param> {
        let Some(value) = app.tag(TAG_PARAMETERS) else {
            return Vec::new();
        };
        let params = match value {
            TagValue::Params(ps) => ps,
            _ => {
                diags.push(self.diag(
                    rule,
                    &el.id,
                    "`parameters` must be a list of name-type pairs".into(),
                ));
                return Vec::new();
            }
        };
        let domain = self.model.nearest_domain(&el.id);
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for p in params {
            if !pddl_name_re().is_match(&p.name) {
                diags.push(self.diag(
                    rule,
                    &el.id,
                    format!("parameter name `{}` is not a valid PDDL name", p.name),
                ));
            }
            if !seen.insert(p.name.to_ascii_lowercase()) {
                diags.push(self.diag(
                    rule,
                    &el.id,
                    format!("duplicate parameter `{}`", p.name),
                ));
            }
            match self.model.element(&p.ty) {
                None => diags.push(self.diag(
                    rule,
                    &el.id,
                    format!(
                        "parameter `{}` references missing element `{}`",
                        p.name, p.ty
                    ),
                )),
                Some(ty_el) => {
                    if !self.has_type_stereotype(&ty_el.id) {
                        diags.push(self.diag(
                            rule,
                            &el.id,
                            format!(
                                "parameter `{}` refers to `{}`, which is not annotated as a type",
                                p.name,
                                self.display_name(ty_el)
                            ),
                        ));
                    } else if let Some(domain_id) = &domain {
                        if !self.model.is_within(&ty_el.id, domain_id) {
                            diags.push(self.diag(
                                rule,
                                &el.id,
                                format!(
                                    "parameter `{}` uses type `{}` from outside this domain",
                                    p.name,
                                    self.display_name(ty_el)
                                ),
                            ));
                        }
                    }
                }
            }
        }
        params.clone()
    }

    fn p06(&self, diags: &mut Vec<Diagnostic>) {
        for (el, app) in self.applications_of(Stereotype::Action) {
            self.check_params_tag(el, app, RuleId::P06, diags);
        }
    }

    fn p07(&self, diags: &mut Vec<Diagnostic>) {
        let mut annotated_flows = self.applications_of(Stereotype::Predicate);
        annotated_flows.extend(self.applications_of(Stereotype::Function));
        for (el, app) in annotated_flows {
            if el.kind != ElementKind::FlowNode {
                continue;
            }
            let params = self.check_params_tag(el, app, RuleId::P07, diags);

            let args: Vec<String> = match app.tag(TAG_ARGUMENTS) {
                None => {
                    if !params.is_empty() {
                        diags.push(self.diag(
                            RuleId::P07,
                            &el.id,
                            format!(
                                "flow `{}` needs an `arguments` tag naming {} action parameter(s)",
                                self.display_name(el),
                                params.len()
                            ),
                        ));
                    }
                    Vec::new()
                }
                Some(_) => match app.arguments_tag() {
                    Some(list) => {
                        if list.len() != params.len() {
                            diags.push(self.diag(
                                RuleId::P07,
                                &el.id,
                                format!(
                                    "`arguments` lists {} name(s) but the flow declares {} parameter(s)",
                                    list.len(),
                                    params.len()
                                ),
                            ));
                        }
                        list.to_vec()
                    }
                    None => {
                        diags.push(self.diag(
                            RuleId::P07,
                            &el.id,
                            "`arguments` must be a list of parameter names".into(),
                        ));
                        Vec::new()
                    }
                },
            };

            if let Some(flow) = self.model.flow(&el.id) {
                if app.stereotype == Stereotype::Function {
                    let src_is_boundary = matches!(
                        self.model.element(&flow.source),
                        Some(e) if e.kind == ElementKind::Activity
                    );
                    let tgt_is_action = matches!(
                        self.model.element(&flow.target),
                        Some(e) if e.kind == ElementKind::ActionNode
                    );
                    if !(src_is_boundary && tgt_is_action) {
                        diags.push(self.diag(
                            RuleId::P07,
                            &el.id,
                            "cost flows run from the activity boundary into an action".into(),
                        ));
                    }
                }

                for endpoint_id in [&flow.source, &flow.target] {
                    let Some(endpoint) = self.model.element(endpoint_id) else {
                        continue;
                    };
                    if endpoint.kind != ElementKind::ActionNode {
                        continue;
                    }
                    match self.model.stereotype_of(&endpoint.id) {
                        Ok(Some(action_app)) if action_app.stereotype == Stereotype::Action => {
                            let action_params = action_app.params_tag().unwrap_or(&[]);
                            for (k, arg) in args.iter().enumerate() {
                                let found = action_params
                                    .iter()
                                    .find(|p| p.name.eq_ignore_ascii_case(arg));
                                match found {
                                    None => diags.push(self.diag(
                                        RuleId::P07,
                                        &el.id,
                                        format!(
                                            "argument `{}` is not a parameter of action `{}`",
                                            arg,
                                            self.display_name(endpoint)
                                        ),
                                    )),
                                    Some(action_param) => {
                                        if let Some(flow_param) = params.get(k) {
                                            if !self
                                                .model
                                                .is_subtype_or_equal(&action_param.ty, &flow_param.ty)
                                            {
                                                diags.push(self.diag(
                                                    RuleId::P07,
                                                    &el.id,
                                                    format!(
                                                        "argument `{}` of action `{}` is not a subtype of the flow's parameter `{}`",
                                                        arg,
                                                        self.display_name(endpoint),
                                                        flow_param.name
                                                    ),
                                                ));
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        _ => diags.push(self.diag(
                            RuleId::P07,
                            &el.id,
                            format!(
                                "flow `{}` connects to `{}`, which has no action annotation",
                                self.display_name(el),
                                self.display_name(endpoint)
                            ),
                        )),
                    }
                }
            }

            if let Some(value) = app.tag(TAG_NEGATED) {
                if app.stereotype == Stereotype::Function {
                    diags.push(self.diag(
                        RuleId::P07,
                        &el.id,
                        "`negated` applies to predicate flows only".into(),
                    ));
                }
                match value {
                    TagValue::Str(s) if s == "true" || s == "false" => {}
                    _ => diags.push(self.diag(
                        RuleId::P07,
                        &el.id,
                        "`negated` must be \"true\" or \"false\"".into(),
                    )),
                }
            }

            if let Some(value) = app.tag(TAG_ROLE) {
                if app.stereotype == Stereotype::Predicate {
                    diags.push(self.diag(
                        RuleId::P07,
                        &el.id,
                        "`role` applies to cost flows only".into(),
                    ));
                } else {
                    match value {
                        TagValue::Str(s) if s == "cost" => {}
                        TagValue::Str(s) if s == "condition" => diags.push(self.diag(
                            RuleId::P07,
                            &el.id,
                            "role `condition` is reserved and not supported".into(),
                        )),
                        TagValue::Str(s) => diags.push(self.diag(
                            RuleId::P07,
                            &el.id,
                            format!("unknown role `{s}`"),
                        )),
                        _ => diags.push(self.diag(
                            RuleId::P07,
                            &el.id,
                            "`role` must be a string".into(),
                        )),
                    }
                }
            }
        }
    }

    fn p08(&self, diags: &mut Vec<Diagnostic>) {
        let mut parent_counts: BTreeMap<&ElementId, usize> = BTreeMap::new();
        for g in self.model.generalizations() {
            if !self.has_type_stereotype(&g.specific) {
                continue;
            }
            *parent_counts.entry(&g.specific).or_default() += 1;
            let Some(specific) = self.model.element(&g.specific) else {
                continue;
            };
            if !self.has_type_stereotype(&g.general) {
                let general_name = self
                    .model
                    .element(&g.general)
                    .map(|e| self.display_name(e).to_string())
                    .unwrap_or_else(|| g.general.to_string());
                diags.push(self.diag(
                    RuleId::P08,
                    &g.specific,
                    format!(
                        "type `{}` specializes `{}`, which is not annotated as a type",
                        self.display_name(specific),
                        general_name
                    ),
                ));
                continue;
            }
            if let Some(domain_id) = self.model.nearest_domain(&g.specific) {
                if !self.model.is_within(&g.general, &domain_id) {
                    let general = self.model.element(&g.general).expect("checked above");
                    diags.push(self.diag(
                        RuleId::P08,
                        &g.specific,
                        format!(
                            "type `{}` has parent `{}` outside its domain",
                            self.display_name(specific),
                            self.display_name(general)
                        ),
                    ));
                }
            }
        }
        for (id, count) in parent_counts {
            if count > 1 {
                let el = self.model.element(id).expect("counted above");
                diags.push(self.diag(
                    RuleId::P08,
                    id,
                    format!(
                        "type `{}` has {} parents; single inheritance only",
                        self.display_name(el),
                        count
                    ),
                ));
            }
        }
        let cycle_members: Vec<String> = self
            .model
            .generalization_cycles()
            .into_iter()
            .filter(|id| self.has_type_stereotype(id))
            .filter_map(|id| {
                self.model
                    .element(&id)
                    .map(|e| self.display_name(e).to_string())
            })
            .collect();
        if !cycle_members.is_empty() {
            diags.push(Diagnostic::error(
                &RuleId::P08.to_string(),
                format!(
                    "type generalizations form a cycle through {}",
                    Self::backticked(&cycle_members)
                ),
            ));
        }
    }

    fn p09(&self, diags: &mut Vec<Diagnostic>) {
        for app in self.model.applications() {
            let Some(el) = self.model.element(&app.element) else {
                continue;
            };
            let what = match app.stereotype {
                Stereotype::Type => "type",
                Stereotype::Predicate => "predicate",
                Stereotype::Function => "function",
                Stereotype::Action => "action",
                Stereotype::Domain => continue,
            };
            if !pddl_name_re().is_match(&el.name) {
                diags.push(self.diag(
                    RuleId::P09,
                    &el.id,
                    format!("{what} name `{}` is not a valid PDDL name", el.name),
                ));
                continue;
            }
            match app.stereotype {
                Stereotype::Type if el.name.eq_ignore_ascii_case("object") => {
                    diags.push(self.diag(
                        RuleId::P09,
                        &el.id,
                        "`object` is the built-in root type and cannot be redeclared".into(),
                    ));
                }
                Stereotype::Predicate | Stereotype::Function
                    if el.name.eq_ignore_ascii_case("total-cost") =>
                {
                    diags.push(self.diag(
                        RuleId::P09,
                        &el.id,
                        "`total-cost` is reserved for the cost metric".into(),
                    ));
                }
                _ => {}
            }
        }
    }

    fn p10(&self, diags: &mut Vec<Diagnostic>) {
        if self.model.domains().is_empty() {
            diags.push(Diagnostic::error(
                &RuleId::P10.to_string(),
                "no package is annotated as a domain; nothing can be generated",
            ));
        }
    }
}
