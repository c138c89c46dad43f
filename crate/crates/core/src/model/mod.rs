//! In-memory planning model: elements, flows, generalizations and
//! stereotype applications.
//!
//! The shapes mirror the profiled subset of a systems-modeling tool:
//! packages own classes and activities, activities own action and flow
//! nodes, and the five stereotypes (Domain, Type, Predicate, Function,
//! Action) attach planning meaning to specific element kinds.

mod graph;

pub use graph::{BuildError, ModelGraph, QueryError};

use std::collections::BTreeMap;
use std::fmt;

/// Opaque element identifier. Unique within one model, never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(id: impl Into<String>) -> Self {
        ElementId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ElementId {
    fn from(s: &str) -> Self {
        ElementId::new(s)
    }
}

impl From<String> for ElementId {
    fn from(s: String) -> Self {
        ElementId::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKind {
    Package,
    Class,
    Activity,
    ActionNode,
    FlowNode,
}

impl ElementKind {
    /// Which child kinds an element of this kind may own.
    pub fn can_own(self, child: ElementKind) -> bool {
        use ElementKind::*;
        match self {
            Package => matches!(child, Package | Class | Activity),
            Activity => matches!(child, ActionNode | FlowNode),
            Class | ActionNode | FlowNode => false,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementKind::Package => "package",
            ElementKind::Class => "class",
            ElementKind::Activity => "activity",
            ElementKind::ActionNode => "action-node",
            ElementKind::FlowNode => "flow-node",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: ElementId,
    pub kind: ElementKind,
    /// Display name; may be empty (common for flow nodes).
    pub name: String,
    /// Owning element; None for roots. Ownership forms a forest.
    pub owner: Option<ElementId>,
}

impl Element {
    pub fn new(id: impl Into<ElementId>, kind: ElementKind, name: &str) -> Self {
        Element {
            id: id.into(),
            kind,
            name: name.to_string(),
            owner: None,
        }
    }

    pub fn owned_by(mut self, owner: impl Into<ElementId>) -> Self {
        self.owner = Some(owner.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowFlavor {
    Object,
    Control,
}

/// Directed edge between two nodes of one activity. The flow's own id
/// doubles as the id of its FlowNode element, which is what stereotype
/// applications attach to.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: ElementId,
    pub flavor: FlowFlavor,
    pub source: ElementId,
    pub target: ElementId,
}

/// `specific` is-a `general`; both must be classes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Generalization {
    pub specific: ElementId,
    pub general: ElementId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stereotype {
    Domain,
    Type,
    Predicate,
    Function,
    Action,
}

impl Stereotype {
    /// Table of admissible applications: each stereotype extends exactly
    /// one element kind.
    pub fn applies_to(self, kind: ElementKind) -> bool {
        matches!(
            (self, kind),
            (Stereotype::Domain, ElementKind::Package)
                | (Stereotype::Type, ElementKind::Class)
                | (Stereotype::Predicate, ElementKind::FlowNode)
                | (Stereotype::Function, ElementKind::FlowNode)
                | (Stereotype::Action, ElementKind::ActionNode)
        )
    }
}

impl fmt::Display for Stereotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stereotype::Domain => "domain",
            Stereotype::Type => "type",
            Stereotype::Predicate => "predicate",
            Stereotype::Function => "function",
            Stereotype::Action => "action",
        };
        f.write_str(s)
    }
}

/// One entry of a typed parameter list: variable name (without the `?`)
/// and the Type class it ranges over.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: ElementId,
}

impl Param {
    pub fn new(name: &str, ty: impl Into<ElementId>) -> Self {
        Param {
            name: name.to_string(),
            ty: ty.into(),
        }
    }
}

/// Value of one tagged value slot.
#[derive(Debug, Clone, PartialEq)]
pub enum TagValue {
    Str(String),
    /// Always finite; construction rejects NaN and infinities.
    Number(f64),
    TypeRef(ElementId),
    Params(Vec<Param>),
    /// Ordered list of plain names (used by `arguments`).
    List(Vec<String>),
}

/// Well-known tag keys.
pub const TAG_PARAMETERS: &str = "parameters";
pub const TAG_ARGUMENTS: &str = "arguments";
pub const TAG_NEGATED: &str = "negated";
pub const TAG_ROLE: &str = "role";

#[derive(Debug, Clone, PartialEq)]
pub struct StereotypeApplication {
    pub element: ElementId,
    pub stereotype: Stereotype,
    pub tags: BTreeMap<String, TagValue>,
}

impl StereotypeApplication {
    pub fn new(element: impl Into<ElementId>, stereotype: Stereotype) -> Self {
        StereotypeApplication {
            element: element.into(),
            stereotype,
            tags: BTreeMap::new(),
        }
    }

    pub fn with_tag(mut self, key: &str, value: TagValue) -> Self {
        self.tags.insert(key.to_string(), value);
        self
    }

    pub fn tag(&self, key: &str) -> Option<&TagValue> {
        self.tags.get(key)
    }

    /// The `parameters` tag when present and of the right shape.
    pub fn params_tag(&self) -> Option<&[Param]> {
        match self.tag(TAG_PARAMETERS) {
            Some(TagValue::Params(ps)) => Some(ps),
            _ => None,
        }
    }

    /// The `arguments` tag when present and of the right shape. An empty
    /// parameter list counts: the empty sequence is normalized to
    /// `Params([])` and is a valid empty argument list too.
    pub fn arguments_tag(&self) -> Option<&[String]> {
        match self.tag(TAG_ARGUMENTS) {
            Some(TagValue::List(args)) => Some(args),
            Some(TagValue::Params(ps)) if ps.is_empty() => Some(&[]),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ownership_table() {
        use ElementKind::*;
        assert!(Package.can_own(Package));
        assert!(Package.can_own(Class));
        assert!(Package.can_own(Activity));
        assert!(!Package.can_own(ActionNode));
        assert!(Activity.can_own(ActionNode));
        assert!(Activity.can_own(FlowNode));
        assert!(!Activity.can_own(Class));
        assert!(!Class.can_own(Class));
        assert!(!ActionNode.can_own(FlowNode));
        assert!(!FlowNode.can_own(FlowNode));
    }

    #[test]
    fn exactly_five_admissible_applications() {
        use ElementKind::*;
        use Stereotype::*;
        let kinds = [Package, Class, Activity, ActionNode, FlowNode];
        let stereotypes = [Domain, Type, Predicate, Function, Action];
        let mut admissible = Vec::new();
        for st in stereotypes {
            for kind in kinds {
                if st.applies_to(kind) {
                    admissible.push((st, kind));
                }
            }
        }
        assert_eq!(
            admissible,
            vec![
                (Domain, Package),
                (Type, Class),
                (Predicate, FlowNode),
                (Function, FlowNode),
                (Action, ActionNode),
            ]
        );
    }
}
