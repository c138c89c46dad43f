//! Validated model graph and its query surface.
//!
//! `ModelGraph::new` either returns a graph on which every structural
//! invariant holds (referential integrity, ownership forest, admissible
//! stereotype applications, acyclic generalizations, well-formed flows)
//! or the full list of violations. Queries on a constructed graph can
//! therefore only fail on caller mistakes such as unknown ids.

use super::{
    Element, ElementId, ElementKind, Flow, Generalization, Stereotype, StereotypeApplication,
    TagValue,
};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("element with empty id")]
    EmptyId,
    #[error("duplicate element id `{0}`")]
    DuplicateId(ElementId),
    #[error("element `{element}` names unknown owner `{owner}`")]
    UnknownOwner { element: ElementId, owner: ElementId },
    #[error("{owner_kind} `{owner}` cannot own {child_kind} `{element}`")]
    OwnerKindMismatch {
        element: ElementId,
        child_kind: ElementKind,
        owner: ElementId,
        owner_kind: ElementKind,
    },
    #[error("containment cycle through `{element}`")]
    ContainmentCycle { element: ElementId },
    #[error("duplicate flow record `{0}`")]
    DuplicateFlow(ElementId),
    #[error("flow `{flow}` has no flow-node element of the same id")]
    FlowWithoutNode { flow: ElementId },
    #[error("flow-node `{element}` has no flow record of the same id")]
    OrphanFlowNode { element: ElementId },
    #[error("flow `{flow}` references unknown element `{endpoint}`")]
    FlowUnknownEndpoint { flow: ElementId, endpoint: ElementId },
    #[error("flow `{flow}` connects an element to itself")]
    FlowSelfLoop { flow: ElementId },
    #[error("flow `{flow}` endpoint `{endpoint}` is a {kind}; endpoints must be action nodes or the activity boundary")]
    FlowEndpointKind {
        flow: ElementId,
        endpoint: ElementId,
        kind: ElementKind,
    },
    #[error("flow `{flow}` crosses activity boundaries")]
    FlowCrossActivity { flow: ElementId },
    #[error("generalization references unknown element `{element}`")]
    GeneralizationUnknown { element: ElementId },
    #[error("generalization endpoint `{element}` is a {kind}, not a class")]
    GeneralizationNotClass {
        element: ElementId,
        kind: ElementKind,
    },
    #[error("generalization cycle through `{element}`")]
    GeneralizationCycle { element: ElementId },
    #[error("stereotype application references unknown element `{element}`")]
    ApplicationUnknownElement { element: ElementId },
    #[error("element `{element}` carries more than one stereotype")]
    DuplicateApplication { element: ElementId },
    #[error("stereotype {stereotype} cannot be applied to {kind} `{element}`")]
    StereotypeMismatch {
        element: ElementId,
        stereotype: Stereotype,
        kind: ElementKind,
    },
    #[error("tag `{tag}` on `{element}` references unknown element `{referenced}`")]
    TagDanglingRef {
        element: ElementId,
        tag: String,
        referenced: ElementId,
    },
    #[error("tag `{tag}` on `{element}` holds a non-finite number")]
    TagNonFiniteNumber { element: ElementId, tag: String },
}

impl BuildError {
    /// The id the error is primarily about, for diagnostics.
    pub fn element_id(&self) -> Option<&ElementId> {
        use BuildError::*;
        match self {
            EmptyId => None,
            DuplicateId(id) | DuplicateFlow(id) => Some(id),
            UnknownOwner { element, .. }
            | OwnerKindMismatch { element, .. }
            | ContainmentCycle { element }
            | OrphanFlowNode { element }
            | GeneralizationUnknown { element }
            | GeneralizationNotClass { element, .. }
            | GeneralizationCycle { element }
            | ApplicationUnknownElement { element }
            | DuplicateApplication { element }
            | StereotypeMismatch { element, .. }
            | TagDanglingRef { element, .. }
            | TagNonFiniteNumber { element, .. } => Some(element),
            FlowWithoutNode { flow }
            | FlowUnknownEndpoint { flow, .. }
            | FlowSelfLoop { flow }
            | FlowEndpointKind { flow, .. }
            | FlowCrossActivity { flow } => Some(flow),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown element `{0}`")]
    UnknownElement(ElementId),
    #[error("element `{element}` is a {kind}, expected {expected}")]
    KindMismatch {
        element: ElementId,
        kind: ElementKind,
        expected: ElementKind,
    },
}

/// Immutable, structurally valid model. All iteration orders are
/// deterministic (keyed by id, or sorted where documented).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    elements: BTreeMap<ElementId, Element>,
    flows: BTreeMap<ElementId, Flow>,
    generalizations: BTreeSet<Generalization>,
    applications: BTreeMap<ElementId, StereotypeApplication>,
}

impl ModelGraph {
    pub fn new(
        elements: Vec<Element>,
        flows: Vec<Flow>,
        generalizations: Vec<Generalization>,
        applications: Vec<StereotypeApplication>,
    ) -> Result<Self, Vec<BuildError>> {
        let mut errors = Vec::new();

        let mut element_map: BTreeMap<ElementId, Element> = BTreeMap::new();
        for e in elements {
            if e.id.is_empty() {
                errors.push(BuildError::EmptyId);
                continue;
            }
            if element_map.contains_key(&e.id) {
                errors.push(BuildError::DuplicateId(e.id.clone()));
                continue;
            }
            element_map.insert(e.id.clone(), e);
        }

        for e in element_map.values() {
            if let Some(owner_id) = &e.owner {
                match element_map.get(owner_id) {
                    None => errors.push(BuildError::UnknownOwner {
                        element: e.id.clone(),
                        owner: owner_id.clone(),
                    }),
                    Some(owner) => {
                        if !owner.kind.can_own(e.kind) {
                            errors.push(BuildError::OwnerKindMismatch {
                                element: e.id.clone(),
                                child_kind: e.kind,
                                owner: owner.id.clone(),
                                owner_kind: owner.kind,
                            });
                        }
                    }
                }
            }
        }

        // Ownership must form a forest. Walk owner chains with a step
        // bound; a chain longer than the element count is a cycle.
        let bound = element_map.len();
        for e in element_map.values() {
            let mut cursor = e.owner.as_ref();
            let mut steps = 0usize;
            while let Some(owner_id) = cursor {
                if steps > bound {
                    errors.push(BuildError::ContainmentCycle {
                        element: e.id.clone(),
                    });
                    break;
                }
                steps += 1;
                cursor = element_map.get(owner_id).and_then(|o| o.owner.as_ref());
            }
        }

        let mut flow_map: BTreeMap<ElementId, Flow> = BTreeMap::new();
        for f in flows {
            if flow_map.contains_key(&f.id) {
                errors.push(BuildError::DuplicateFlow(f.id.clone()));
                continue;
            }
            flow_map.insert(f.id.clone(), f);
        }

        for f in flow_map.values() {
            match element_map.get(&f.id) {
                Some(e) if e.kind == ElementKind::FlowNode => {}
                _ => errors.push(BuildError::FlowWithoutNode { flow: f.id.clone() }),
            }
            if f.source == f.target {
                errors.push(BuildError::FlowSelfLoop { flow: f.id.clone() });
            }
            let mut activities = Vec::new();
            for endpoint in [&f.source, &f.target] {
                match element_map.get(endpoint) {
                    None => errors.push(BuildError::FlowUnknownEndpoint {
                        flow: f.id.clone(),
                        endpoint: endpoint.clone(),
                    }),
                    Some(e) => match e.kind {
                        ElementKind::ActionNode => activities.push(e.owner.clone()),
                        ElementKind::Activity => activities.push(Some(e.id.clone())),
                        kind => errors.push(BuildError::FlowEndpointKind {
                            flow: f.id.clone(),
                            endpoint: endpoint.clone(),
                            kind,
                        }),
                    },
                }
            }
            if activities.len() == 2 {
                let same = match (&activities[0], &activities[1]) {
                    (Some(a), Some(b)) => a == b,
                    _ => false,
                };
                if !same {
                    errors.push(BuildError::FlowCrossActivity { flow: f.id.clone() });
                }
            }
        }

        for e in element_map.values() {
            if e.kind == ElementKind::FlowNode && !flow_map.contains_key(&e.id) {
                errors.push(BuildError::OrphanFlowNode {
                    element: e.id.clone(),
                });
            }
        }

        let general_set: BTreeSet<Generalization> = generalizations.into_iter().collect();
        for g in &general_set {
            for side in [&g.specific, &g.general] {
                match element_map.get(side) {
                    None => errors.push(BuildError::GeneralizationUnknown {
                        element: side.clone(),
                    }),
                    Some(e) if e.kind != ElementKind::Class => {
                        errors.push(BuildError::GeneralizationNotClass {
                            element: side.clone(),
                            kind: e.kind,
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        for id in find_generalization_cycles(&general_set) {
            errors.push(BuildError::GeneralizationCycle { element: id });
        }

        let mut app_map: BTreeMap<ElementId, StereotypeApplication> = BTreeMap::new();
        for app in applications {
            match element_map.get(&app.element) {
                None => {
                    errors.push(BuildError::ApplicationUnknownElement {
                        element: app.element.clone(),
                    });
                    continue;
                }
                Some(e) => {
                    if app_map.contains_key(&app.element) {
                        errors.push(BuildError::DuplicateApplication {
                            element: app.element.clone(),
                        });
                        continue;
                    }
                    if !app.stereotype.applies_to(e.kind) {
                        errors.push(BuildError::StereotypeMismatch {
                            element: app.element.clone(),
                            stereotype: app.stereotype,
                            kind: e.kind,
                        });
                        continue;
                    }
                }
            }
            for (key, value) in &app.tags {
                match value {
                    TagValue::Number(n) if !n.is_finite() => {
                        errors.push(BuildError::TagNonFiniteNumber {
                            element: app.element.clone(),
                            tag: key.clone(),
                        });
                    }
                    TagValue::TypeRef(id) => {
                        if !element_map.contains_key(id) {
                            errors.push(BuildError::TagDanglingRef {
                                element: app.element.clone(),
                                tag: key.clone(),
                                referenced: id.clone(),
                            });
                        }
                    }
                    TagValue::Params(params) => {
                        for p in params {
                            if !element_map.contains_key(&p.ty) {
                                errors.push(BuildError::TagDanglingRef {
                                    element: app.element.clone(),
                                    tag: key.clone(),
                                    referenced: p.ty.clone(),
                                });
                            }
                        }
                    }
                    _ => {}
                }
            }
            app_map.insert(app.element.clone(), app);
        }

        if errors.is_empty() {
            for app in app_map.values_mut() {
                normalize_tags(app);
            }
            Ok(ModelGraph {
                elements: element_map,
                flows: flow_map,
                generalizations: general_set,
                applications: app_map,
            })
        } else {
            Err(errors)
        }
    }

    /// Assemble a graph without running the structural checks. Intended
    /// for tooling that re-validates (the rule engine's hierarchy checks
    /// are unreachable on checked graphs and are tested through this).
    /// Later entries win on id collisions.
    pub fn new_unchecked(
        elements: Vec<Element>,
        flows: Vec<Flow>,
        generalizations: Vec<Generalization>,
        applications: Vec<StereotypeApplication>,
    ) -> Self {
        ModelGraph {
            elements: elements.into_iter().map(|e| (e.id.clone(), e)).collect(),
            flows: flows.into_iter().map(|f| (f.id.clone(), f)).collect(),
            generalizations: generalizations.into_iter().collect(),
            applications: applications
                .into_iter()
                .map(|mut a| {
                    normalize_tags(&mut a);
                    (a.element.clone(), a)
                })
                .collect(),
        }
    }

    pub fn element(&self, id: &ElementId) -> Option<&Element> {
        self.elements.get(id)
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elements.values()
    }

    pub fn flows(&self) -> impl Iterator<Item = &Flow> {
        self.flows.values()
    }

    pub fn flow(&self, id: &ElementId) -> Option<&Flow> {
        self.flows.get(id)
    }

    pub fn generalizations(&self) -> impl Iterator<Item = &Generalization> {
        self.generalizations.iter()
    }

    pub fn applications(&self) -> impl Iterator<Item = &StereotypeApplication> {
        self.applications.values()
    }

    /// Stereotype application on `id`, or None for plain elements.
    pub fn stereotype_of(
        &self,
        id: &ElementId,
    ) -> Result<Option<&StereotypeApplication>, QueryError> {
        if !self.elements.contains_key(id) {
            return Err(QueryError::UnknownElement(id.clone()));
        }
        Ok(self.applications.get(id))
    }

    fn require_kind(&self, id: &ElementId, expected: ElementKind) -> Result<&Element, QueryError> {
        let e = self
            .elements
            .get(id)
            .ok_or_else(|| QueryError::UnknownElement(id.clone()))?;
        if e.kind != expected {
            return Err(QueryError::KindMismatch {
                element: id.clone(),
                kind: e.kind,
                expected,
            });
        }
        Ok(e)
    }

    /// Predicate/Function-annotated flows targeting `action`, in flow-id
    /// order.
    pub fn incoming_annotated_flows(
        &self,
        action: &ElementId,
    ) -> Result<Vec<(&Flow, &StereotypeApplication)>, QueryError> {
        self.require_kind(action, ElementKind::ActionNode)?;
        Ok(self.annotated_flows_where(|f| &f.target == action))
    }

    /// Predicate/Function-annotated flows leaving `action`, in flow-id
    /// order.
    pub fn outgoing_annotated_flows(
        &self,
        action: &ElementId,
    ) -> Result<Vec<(&Flow, &StereotypeApplication)>, QueryError> {
        self.require_kind(action, ElementKind::ActionNode)?;
        Ok(self.annotated_flows_where(|f| &f.source == action))
    }

    fn annotated_flows_where(
        &self,
        keep: impl Fn(&Flow) -> bool,
    ) -> Vec<(&Flow, &StereotypeApplication)> {
        self.flows
            .values()
            .filter(|f| keep(f))
            .filter_map(|f| {
                self.applications
                    .get(&f.id)
                    .filter(|app| {
                        matches!(app.stereotype, Stereotype::Predicate | Stereotype::Function)
                    })
                    .map(|app| (f, app))
            })
            .collect()
    }

    /// Type-stereotyped classes transitively owned by `domain`, ordered
    /// by (name, id).
    pub fn types_in_domain(&self, domain: &ElementId) -> Result<Vec<&Element>, QueryError> {
        self.require_kind(domain, ElementKind::Package)?;
        let mut found: Vec<&Element> = self
            .members_transitive(domain)
            .into_iter()
            .filter(|e| {
                e.kind == ElementKind::Class
                    && matches!(
                        self.applications.get(&e.id),
                        Some(app) if app.stereotype == Stereotype::Type
                    )
            })
            .collect();
        found.sort_by(|a, b| (&a.name, &a.id).cmp(&(&b.name, &b.id)));
        Ok(found)
    }

    /// Domain-stereotyped packages, ordered by (name, id).
    pub fn domains(&self) -> Vec<&Element> {
        let mut found: Vec<&Element> = self
            .elements
            .values()
            .filter(|e| {
                matches!(
                    self.applications.get(&e.id),
                    Some(app) if app.stereotype == Stereotype::Domain
                )
            })
            .collect();
        found.sort_by(|a, b| (&a.name, &a.id).cmp(&(&b.name, &b.id)));
        found
    }

    /// Every element transitively owned by `root` (excluding the root),
    /// in id order. Safe on unchecked graphs: walks child links that
    /// exist in the element table.
    pub fn members_transitive(&self, root: &ElementId) -> Vec<&Element> {
        let mut out = Vec::new();
        let mut frontier: BTreeSet<&ElementId> = BTreeSet::new();
        frontier.insert(root);
        let mut seen: BTreeSet<&ElementId> = frontier.clone();
        while !frontier.is_empty() {
            let mut next = BTreeSet::new();
            for e in self.elements.values() {
                if let Some(owner) = &e.owner {
                    if frontier.contains(owner) && seen.insert(&e.id) {
                        out.push(e);
                        next.insert(&e.id);
                    }
                }
            }
            frontier = next;
        }
        out.sort_by_key(|e| &e.id);
        out
    }

    /// Whether `id` sits inside `ancestor`'s ownership subtree.
    pub fn is_within(&self, id: &ElementId, ancestor: &ElementId) -> bool {
        let mut current = match self.elements.get(id) {
            Some(el) => el.owner.clone(),
            None => return false,
        };
        let mut steps = 0;
        while let Some(oid) = current {
            if &oid == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.elements.len() {
                return false;
            }
            current = self.elements.get(&oid).and_then(|el| el.owner.clone());
        }
        false
    }

    /// The innermost domain-annotated package enclosing `id`.
    pub fn nearest_domain(&self, id: &ElementId) -> Option<ElementId> {
        let mut current = self.elements.get(id)?.owner.clone();
        let mut steps = 0;
        while let Some(oid) = current {
            let el = self.elements.get(&oid)?;
            if el.kind == ElementKind::Package
                && matches!(
                    self.applications.get(&oid),
                    Some(app) if app.stereotype == Stereotype::Domain
                )
            {
                return Some(oid);
            }
            steps += 1;
            if steps > self.elements.len() {
                return None;
            }
            current = el.owner.clone();
        }
        None
    }

    /// Ids of elements lying on any generalization cycle, sorted.
    /// Checked graphs never have one; re-validating an unchecked
    /// graph does encounter them.
    pub fn generalization_cycles(&self) -> Vec<ElementId> {
        find_generalization_cycles(&self.generalizations)
    }

    /// Direct generalization parents of a class, in id order.
    pub fn generals_of(&self, class: &ElementId) -> Vec<&ElementId> {
        self.generalizations
            .iter()
            .filter(|g| &g.specific == class)
            .map(|g| &g.general)
            .collect()
    }

    /// True when `a` equals `b` or `b` is reachable from `a` through
    /// generalizations.
    pub fn is_subtype_or_equal(&self, a: &ElementId, b: &ElementId) -> bool {
        if a == b {
            return true;
        }
        let mut seen: BTreeSet<&ElementId> = BTreeSet::new();
        let mut stack = vec![a];
        while let Some(id) = stack.pop() {
            for parent in self.generals_of(id) {
                if parent == b {
                    return true;
                }
                if seen.insert(parent) {
                    stack.push(parent);
                }
            }
        }
        false
    }

    /// Slash-joined names from the root to the element, falling back to
    /// the id where a name is empty. Cycle-safe.
    pub fn element_path(&self, id: &ElementId) -> String {
        let mut parts = Vec::new();
        let mut cursor = Some(id);
        let mut steps = 0usize;
        while let Some(cur) = cursor {
            if steps > self.elements.len() {
                break;
            }
            steps += 1;
            match self.elements.get(cur) {
                Some(e) => {
                    parts.push(if e.name.is_empty() {
                        e.id.as_str().to_string()
                    } else {
                        e.name.clone()
                    });
                    cursor = e.owner.as_ref();
                }
                None => {
                    parts.push(cur.as_str().to_string());
                    cursor = None;
                }
            }
        }
        parts.reverse();
        parts.join("/")
    }
}

/// The interchange format cannot tell an empty name list from an empty
/// parameter list, so the empty sequence gets one in-memory shape.
fn normalize_tags(app: &mut StereotypeApplication) {
    for value in app.tags.values_mut() {
        if matches!(value, TagValue::List(l) if l.is_empty()) {
            *value = TagValue::Params(Vec::new());
        }
    }
}

/// Ids of classes that sit on a generalization cycle, in order.
fn find_generalization_cycles(edges: &BTreeSet<Generalization>) -> Vec<ElementId> {
    let mut adjacency: BTreeMap<&ElementId, Vec<&ElementId>> = BTreeMap::new();
    for g in edges {
        adjacency.entry(&g.specific).or_default().push(&g.general);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Visiting,
        Done,
    }
    let mut marks: BTreeMap<&ElementId, Mark> = BTreeMap::new();
    let mut on_cycle: BTreeSet<ElementId> = BTreeSet::new();

    // Iterative DFS with an explicit stack; detects back edges.
    for start in adjacency.keys().copied() {
        if marks.contains_key(start) {
            continue;
        }
        let mut stack: Vec<(&ElementId, usize)> = vec![(start, 0)];
        marks.insert(start, Mark::Visiting);
        while let Some((node, next_child)) = stack.pop() {
            let children = adjacency.get(node).map(|v| v.as_slice()).unwrap_or(&[]);
            if next_child < children.len() {
                stack.push((node, next_child + 1));
                let child = children[next_child];
                match marks.get(child) {
                    Some(Mark::Visiting) => {
                        // Back edge: everything from `child` up the stack
                        // is on a cycle.
                        on_cycle.insert(child.clone());
                        for (n, _) in stack.iter().rev() {
                            on_cycle.insert((*n).clone());
                            if *n == child {
                                break;
                            }
                        }
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(child, Mark::Visiting);
                        stack.push((child, 0));
                    }
                }
            } else {
                marks.insert(node, Mark::Done);
            }
        }
    }
    on_cycle.into_iter().collect()
}
