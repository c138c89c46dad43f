//! Test-only helpers for assembling models without ceremony.

use crate::model::{BuildError, ModelGraph};
use crate::model::{
    Element, ElementKind, Flow, FlowFlavor, Generalization, Param, Stereotype,
    StereotypeApplication, TagValue,
};

#[derive(Default)]
pub struct ModelBuilder {
    elements: Vec<Element>,
    flows: Vec<Flow>,
    generalizations: Vec<Generalization>,
    applications: Vec<StereotypeApplication>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn element(
        mut self,
        id: &str,
        kind: ElementKind,
        name: &str,
        owner: Option<&str>,
    ) -> Self {
        let mut el = Element::new(id, kind, name);
        if let Some(owner) = owner {
            el = el.owned_by(owner);
        }
        self.elements.push(el);
        self
    }

    pub fn package(self, id: &str, name: &str, owner: Option<&str>) -> Self {
        self.element(id, ElementKind::Package, name, owner)
    }

    pub fn class(self, id: &str, name: &str, owner: &str) -> Self {
        self.element(id, ElementKind::Class, name, Some(owner))
    }

    pub fn activity(self, id: &str, name: &str, owner: &str) -> Self {
        self.element(id, ElementKind::Activity, name, Some(owner))
    }

    pub fn action(self, id: &str, name: &str, owner: &str) -> Self {
        self.element(id, ElementKind::ActionNode, name, Some(owner))
    }

    /// Adds a flow node plus its flow record in one go.
    pub fn flow(mut self, id: &str, activity: &str, name: &str, source: &str, target: &str) -> Self {
        self = self.element(id, ElementKind::FlowNode, name, Some(activity));
        self.flows.push(Flow {
            id: id.into(),
            flavor: FlowFlavor::Object,
            source: source.into(),
            target: target.into(),
        });
        self
    }

    pub fn generalize(mut self, specific: &str, general: &str) -> Self {
        self.generalizations.push(Generalization {
            specific: specific.into(),
            general: general.into(),
        });
        self
    }

    pub fn apply(mut self, element: &str, stereotype: Stereotype) -> Self {
        self.applications
            .push(StereotypeApplication::new(element, stereotype));
        self
    }

    pub fn apply_tagged(
        mut self,
        element: &str,
        stereotype: Stereotype,
        tags: Vec<(&str, TagValue)>,
    ) -> Self {
        let mut app = StereotypeApplication::new(element, stereotype);
        for (key, value) in tags {
            app = app.with_tag(key, value);
        }
        self.applications.push(app);
        self
    }

    pub fn build(self) -> Result<ModelGraph, Vec<BuildError>> {
        ModelGraph::new(
            self.elements,
            self.flows,
            self.generalizations,
            self.applications,
        )
    }

    pub fn build_unchecked(self) -> ModelGraph {
        ModelGraph::new_unchecked(
            self.elements,
            self.flows,
            self.generalizations,
            self.applications,
        )
    }
}

pub fn params(pairs: &[(&str, &str)]) -> TagValue {
    TagValue::Params(
        pairs
            .iter()
            .map(|(name, ty)| Param::new(name, *ty))
            .collect(),
    )
}

pub fn arguments(names: &[&str]) -> TagValue {
    TagValue::List(names.iter().map(|s| s.to_string()).collect())
}

/// A small single-domain model: one type, one predicate flow feeding
/// one action, one cost flow, a boundary result flow. Structurally
/// valid and clean under every modeling rule.
pub fn tiny_domain() -> ModelBuilder {
    ModelBuilder::new()
        .package("pkg-d", "workcell", None)
        .apply("pkg-d", Stereotype::Domain)
        .class("ty-item", "Item", "pkg-d")
        .apply("ty-item", Stereotype::Type)
        .activity("act", "Process", "pkg-d")
        .action("a-work", "Work", "act")
        .apply_tagged(
            "a-work",
            Stereotype::Action,
            vec![("parameters", params(&[("x", "ty-item")]))],
        )
        .flow("f-ready", "act", "Ready", "act", "a-work")
        .apply_tagged(
            "f-ready",
            Stereotype::Predicate,
            vec![
                ("parameters", params(&[("i", "ty-item")])),
                ("arguments", arguments(&["x"])),
            ],
        )
        .flow("f-done", "act", "Done", "a-work", "act")
        .apply_tagged(
            "f-done",
            Stereotype::Predicate,
            vec![
                ("parameters", params(&[("i", "ty-item")])),
                ("arguments", arguments(&["x"])),
            ],
        )
        .flow("f-effort", "act", "Effort", "act", "a-work")
        .apply_tagged(
            "f-effort",
            Stereotype::Function,
            vec![
                ("parameters", params(&[("i", "ty-item")])),
                ("arguments", arguments(&["x"])),
            ],
        )
}
