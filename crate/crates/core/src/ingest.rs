//! Model interchange: loading `.pm1` files into a `ModelGraph` and
//! saving graphs back out.
//!
//! The on-disk form is TOML with four array-of-table sections
//! (`element`, `flow`, `generalization`, `application`) plus a
//! `format_version` marker; the full schema lives in
//! docs/interchange-schema.md. Loading is strict: unknown keys, unknown
//! enum values and unknown tag names are rejected so typos surface
//! instead of silently dropping data. Saving is canonical (sorted
//! sections, fixed layout), so identical graphs produce identical
//! bytes.

use crate::diag::{position_of, Diagnostic};
use crate::model::{
    BuildError, Element, ElementId, ElementKind, Flow, FlowFlavor, Generalization, ModelGraph,
    Param, Stereotype, StereotypeApplication, TagValue,
};
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    format_version: String,
    #[serde(default, rename = "element")]
    elements: Vec<ElementDoc>,
    #[serde(default, rename = "flow")]
    flows: Vec<FlowDoc>,
    #[serde(default, rename = "generalization")]
    generalizations: Vec<GeneralizationDoc>,
    #[serde(default, rename = "application")]
    applications: Vec<ApplicationDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementDoc {
    id: String,
    kind: KindDoc,
    #[serde(default)]
    name: String,
    #[serde(default)]
    owner: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KindDoc {
    Package,
    Class,
    Activity,
    ActionNode,
    FlowNode,
}

impl From<KindDoc> for ElementKind {
    fn from(k: KindDoc) -> Self {
        match k {
            KindDoc::Package => ElementKind::Package,
            KindDoc::Class => ElementKind::Class,
            KindDoc::Activity => ElementKind::Activity,
            KindDoc::ActionNode => ElementKind::ActionNode,
            KindDoc::FlowNode => ElementKind::FlowNode,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowDoc {
    id: String,
    flavor: FlavorDoc,
    source: String,
    target: String,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FlavorDoc {
    Object,
    Control,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneralizationDoc {
    specific: String,
    general: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplicationDoc {
    element: String,
    stereotype: StereotypeDoc,
    #[serde(default)]
    tags: BTreeMap<String, TagValueDoc>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StereotypeDoc {
    Domain,
    Type,
    Predicate,
    Function,
    Action,
}

impl From<StereotypeDoc> for Stereotype {
    fn from(s: StereotypeDoc) -> Self {
        match s {
            StereotypeDoc::Domain => Stereotype::Domain,
            StereotypeDoc::Type => Stereotype::Type,
            StereotypeDoc::Predicate => Stereotype::Predicate,
            StereotypeDoc::Function => Stereotype::Function,
            StereotypeDoc::Action => Stereotype::Action,
        }
    }
}

/// Tag values are self-describing: a bare string, a bare number,
/// `{ ref = "id" }` for a type reference, an array of
/// `{ name = "..", type = "id" }` tables for a parameter list, or an
/// array of strings for a name list. The empty array is the empty
/// parameter list (which doubles as an empty name list).
#[derive(Debug)]
enum TagValueDoc {
    Str(String),
    Number(f64),
    Ref(String),
    Params(Vec<(String, String)>),
    List(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum SeqItemDoc {
    Name(String),
    Param {
        name: String,
        #[serde(rename = "type")]
        ty: String,
    },
}

impl<'de> Deserialize<'de> for TagValueDoc {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TagVisitor;

        impl<'de> Visitor<'de> for TagVisitor {
            type Value = TagValueDoc;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(
                    "a string, a number, { ref = \"id\" }, an array of \
                     { name, type } tables, or an array of strings",
                )
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<TagValueDoc, E> {
                Ok(TagValueDoc::Str(v.to_string()))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<TagValueDoc, E> {
                Ok(TagValueDoc::Number(v as f64))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<TagValueDoc, E> {
                Ok(TagValueDoc::Number(v))
            }

            fn visit_bool<E: de::Error>(self, v: bool) -> Result<TagValueDoc, E> {
                // Friendlier than a type error: `negated = true` is the
                // obvious thing to write.
                Ok(TagValueDoc::Str(v.to_string()))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<TagValueDoc, A::Error> {
                let mut reference: Option<String> = None;
                while let Some(key) = map.next_key::<String>()? {
                    if key == "ref" && reference.is_none() {
                        reference = Some(map.next_value()?);
                    } else {
                        return Err(de::Error::custom(format!(
                            "unexpected key `{key}` in type reference; expected {{ ref = \"id\" }}"
                        )));
                    }
                }
                reference
                    .map(TagValueDoc::Ref)
                    .ok_or_else(|| de::Error::custom("type reference needs a `ref` key"))
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<TagValueDoc, A::Error> {
                let mut names = Vec::new();
                let mut params = Vec::new();
                while let Some(item) = seq.next_element::<SeqItemDoc>()? {
                    match item {
                        SeqItemDoc::Name(n) => names.push(n),
                        SeqItemDoc::Param { name, ty } => params.push((name, ty)),
                    }
                }
                match (names.is_empty(), params.is_empty()) {
                    (true, _) => Ok(TagValueDoc::Params(params)),
                    (false, true) => Ok(TagValueDoc::List(names)),
                    (false, false) => Err(de::Error::custom(
                        "array mixes strings and { name, type } tables",
                    )),
                }
            }
        }

        deserializer.deserialize_any(TagVisitor)
    }
}

impl From<TagValueDoc> for TagValue {
    fn from(v: TagValueDoc) -> Self {
        match v {
            TagValueDoc::Str(s) => TagValue::Str(s),
            TagValueDoc::Number(n) => TagValue::Number(n),
            TagValueDoc::Ref(id) => TagValue::TypeRef(ElementId::new(id)),
            TagValueDoc::Params(ps) => TagValue::Params(
                ps.into_iter()
                    .map(|(name, ty)| Param {
                        name,
                        ty: ElementId::new(ty),
                    })
                    .collect(),
            ),
            TagValueDoc::List(l) => TagValue::List(l),
        }
    }
}

/// Tag names each stereotype understands; anything else is a typo.
fn known_tags(stereotype: Stereotype) -> &'static [&'static str] {
    match stereotype {
        Stereotype::Action => &["parameters"],
        Stereotype::Predicate | Stereotype::Function => {
            &["parameters", "arguments", "negated", "role"]
        }
        Stereotype::Domain | Stereotype::Type => &[],
    }
}

pub fn load_model(text: &str) -> Result<ModelGraph, Vec<Diagnostic>> {
    let doc: Doc = toml::from_str(text).map_err(|err| {
        let mut d = Diagnostic::error("ingest.syntax", err.message());
        if let Some(span) = err.span() {
            let pos = position_of(text, span.start);
            d = d.at_position(pos.line, pos.column);
        }
        vec![d]
    })?;

    if doc.format_version != FORMAT_VERSION {
        return Err(vec![Diagnostic::error(
            "ingest.version",
            format!(
                "unsupported format_version `{}`; this reader understands `{}`",
                doc.format_version, FORMAT_VERSION
            ),
        )]);
    }

    let mut diags = Vec::new();

    let elements = doc
        .elements
        .into_iter()
        .map(|e| Element {
            id: ElementId::new(e.id),
            kind: e.kind.into(),
            name: e.name,
            owner: e.owner.map(ElementId::new),
        })
        .collect();
    let flows = doc
        .flows
        .into_iter()
        .map(|f| Flow {
            id: ElementId::new(f.id),
            flavor: match f.flavor {
                FlavorDoc::Object => FlowFlavor::Object,
                FlavorDoc::Control => FlowFlavor::Control,
            },
            source: ElementId::new(f.source),
            target: ElementId::new(f.target),
        })
        .collect();
    let generalizations = doc
        .generalizations
        .into_iter()
        .map(|g| Generalization {
            specific: ElementId::new(g.specific),
            general: ElementId::new(g.general),
        })
        .collect();

    let mut applications = Vec::new();
    for app in doc.applications {
        let stereotype: Stereotype = app.stereotype.into();
        let allowed = known_tags(stereotype);
        let mut tags = BTreeMap::new();
        for (key, value) in app.tags {
            if !allowed.contains(&key.as_str()) {
                diags.push(
                    Diagnostic::error(
                        "ingest.unknown-tag",
                        format!("stereotype `{stereotype}` has no tag `{key}`"),
                    )
                    .at_element(&app.element)
                    .with_element_id(&app.element),
                );
                continue;
            }
            tags.insert(key, value.into());
        }
        applications.push(StereotypeApplication {
            element: ElementId::new(app.element),
            stereotype,
            tags,
        });
    }

    match ModelGraph::new(elements, flows, generalizations, applications) {
        Ok(graph) if diags.is_empty() => Ok(graph),
        Ok(_) => Err(diags),
        Err(errors) => {
            diags.extend(errors.iter().map(build_error_diag));
            Err(diags)
        }
    }
}

fn build_error_diag(err: &BuildError) -> Diagnostic {
    use BuildError::*;
    let rule = match err {
        EmptyId => "ingest.empty-id",
        DuplicateId(_) | DuplicateFlow(_) => "ingest.duplicate-id",
        UnknownOwner { .. }
        | FlowUnknownEndpoint { .. }
        | GeneralizationUnknown { .. }
        | ApplicationUnknownElement { .. }
        | TagDanglingRef { .. } => "ingest.dangling-ref",
        OwnerKindMismatch { .. } => "ingest.owner-kind",
        ContainmentCycle { .. } => "ingest.containment-cycle",
        FlowWithoutNode { .. } | OrphanFlowNode { .. } => "ingest.flow-node",
        FlowSelfLoop { .. } | FlowEndpointKind { .. } | FlowCrossActivity { .. } => {
            "ingest.flow-endpoints"
        }
        GeneralizationNotClass { .. } => "ingest.generalization",
        GeneralizationCycle { .. } => "ingest.generalization-cycle",
        DuplicateApplication { .. } => "ingest.duplicate-stereotype",
        StereotypeMismatch { .. } => "ingest.stereotype-kind",
        TagNonFiniteNumber { .. } => "ingest.bad-number",
    };
    let mut d = Diagnostic::error(rule, err.to_string());
    if let Some(id) = err.element_id() {
        d = d.at_element(id.as_str()).with_element_id(id.as_str());
    }
    d
}

/// Serialize in canonical form: fixed section order, entries sorted by
/// id, keys in fixed order, tags sorted by name.
pub fn save_model(model: &ModelGraph) -> String {
    let mut out = String::new();
    out.push_str(&format!("format_version = {}\n", toml_str(FORMAT_VERSION)));

    for e in model.elements() {
        out.push_str("\n[[element]]\n");
        out.push_str(&format!("id = {}\n", toml_str(e.id.as_str())));
        out.push_str(&format!("kind = {}\n", toml_str(kind_name(e.kind))));
        if !e.name.is_empty() {
            out.push_str(&format!("name = {}\n", toml_str(&e.name)));
        }
        if let Some(owner) = &e.owner {
            out.push_str(&format!("owner = {}\n", toml_str(owner.as_str())));
        }
    }

    for f in model.flows() {
        out.push_str("\n[[flow]]\n");
        out.push_str(&format!("id = {}\n", toml_str(f.id.as_str())));
        let flavor = match f.flavor {
            FlowFlavor::Object => "object",
            FlowFlavor::Control => "control",
        };
        out.push_str(&format!("flavor = {}\n", toml_str(flavor)));
        out.push_str(&format!("source = {}\n", toml_str(f.source.as_str())));
        out.push_str(&format!("target = {}\n", toml_str(f.target.as_str())));
    }

    for g in model.generalizations() {
        out.push_str("\n[[generalization]]\n");
        out.push_str(&format!("specific = {}\n", toml_str(g.specific.as_str())));
        out.push_str(&format!("general = {}\n", toml_str(g.general.as_str())));
    }

    for app in model.applications() {
        out.push_str("\n[[application]]\n");
        out.push_str(&format!("element = {}\n", toml_str(app.element.as_str())));
        out.push_str(&format!(
            "stereotype = {}\n",
            toml_str(&app.stereotype.to_string())
        ));
        for (key, value) in &app.tags {
            out.push_str(&format!("tags.{} = {}\n", toml_key(key), tag_value(value)));
        }
    }

    out
}

fn kind_name(kind: ElementKind) -> &'static str {
    match kind {
        ElementKind::Package => "package",
        ElementKind::Class => "class",
        ElementKind::Activity => "activity",
        ElementKind::ActionNode => "action-node",
        ElementKind::FlowNode => "flow-node",
    }
}

fn tag_value(value: &TagValue) -> String {
    match value {
        TagValue::Str(s) => toml_str(s),
        TagValue::Number(n) => toml_float(*n),
        TagValue::TypeRef(id) => format!("{{ ref = {} }}", toml_str(id.as_str())),
        TagValue::Params(ps) => {
            let entries: Vec<String> = ps
                .iter()
                .map(|p| {
                    format!(
                        "{{ name = {}, type = {} }}",
                        toml_str(&p.name),
                        toml_str(p.ty.as_str())
                    )
                })
                .collect();
            format!("[{}]", entries.join(", "))
        }
        TagValue::List(l) => {
            let entries: Vec<String> = l.iter().map(|s| toml_str(s)).collect();
            format!("[{}]", entries.join(", "))
        }
    }
}

/// TOML basic string with escapes.
fn toml_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\u{0008}' => out.push_str("\\b"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\u{000C}' => out.push_str("\\f"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                out.push_str(&format!("\\u{:04X}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Bare key when possible, quoted otherwise.
fn toml_key(key: &str) -> String {
    let bare = !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if bare {
        key.to_string()
    } else {
        toml_str(key)
    }
}

/// TOML floats always carry a fractional part or exponent.
fn toml_float(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{:.1}", v)
    } else {
        let s = format!("{}", v);
        if s.contains('.') || s.contains('e') || s.contains('E') {
            s
        } else {
            format!("{}.0", s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diag::Severity;

    const MINIMAL: &str = r#"
format_version = "1"

[[element]]
id = "pkg"
kind = "package"
name = "production"

[[element]]
id = "act"
kind = "activity"
name = "Assembly"
owner = "pkg"

[[element]]
id = "part"
kind = "class"
name = "part"
owner = "pkg"

[[element]]
id = "assemble"
kind = "action-node"
name = "assemble-part"
owner = "act"

[[element]]
id = "f1"
kind = "flow-node"
name = "assembled"
owner = "act"

[[flow]]
id = "f1"
flavor = "object"
source = "assemble"
target = "act"

[[application]]
element = "pkg"
stereotype = "domain"

[[application]]
element = "part"
stereotype = "type"

[[application]]
element = "assemble"
stereotype = "action"
tags.parameters = [{ name = "p", type = "part" }]

[[application]]
element = "f1"
stereotype = "predicate"
tags.parameters = [{ name = "p", type = "part" }]
tags.arguments = ["p"]
"#;

    #[test]
    fn loads_minimal_model() {
        let m = load_model(MINIMAL).unwrap();
        assert_eq!(m.domains().len(), 1);
        let app = m.stereotype_of(&"assemble".into()).unwrap().unwrap();
        assert_eq!(app.params_tag().unwrap().len(), 1);
        let flows = m.incoming_annotated_flows(&"assemble".into()).unwrap();
        assert!(flows.is_empty());
        let out = m.outgoing_annotated_flows(&"assemble".into()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1.arguments_tag().unwrap(), ["p"]);
    }

    #[test]
    fn save_load_round_trips() {
        let m = load_model(MINIMAL).unwrap();
        let saved = save_model(&m);
        let reloaded = load_model(&saved).unwrap();
        assert_eq!(m, reloaded);
        // Canonical output is a fixed point.
        assert_eq!(saved, save_model(&reloaded));
    }

    #[test]
    fn rejects_unknown_document_key_with_position() {
        let text = "format_version = \"1\"\n\n[[element]]\nid = \"a\"\nkind = \"package\"\ncolour = \"red\"\n";
        let diags = load_model(text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, "ingest.syntax");
        assert!(diags[0].position.is_some());
        assert!(diags[0].message.contains("colour"), "{}", diags[0].message);
    }

    #[test]
    fn rejects_bad_toml_with_position() {
        let diags = load_model("format_version = \"1\"\n[[element\n").unwrap_err();
        assert_eq!(diags[0].rule, "ingest.syntax");
        let pos = diags[0].position.unwrap();
        assert_eq!(pos.line, 2);
    }

    #[test]
    fn rejects_wrong_version() {
        let diags = load_model("format_version = \"2\"\n").unwrap_err();
        assert_eq!(diags[0].rule, "ingest.version");
    }

    #[test]
    fn reports_each_dangling_reference() {
        let text = r#"
format_version = "1"

[[element]]
id = "act"
kind = "activity"
name = "A"

[[element]]
id = "n1"
kind = "action-node"
owner = "act"

[[element]]
id = "f1"
kind = "flow-node"
owner = "act"

[[flow]]
id = "f1"
flavor = "object"
source = "n1"
target = "ghost-a"

[[generalization]]
specific = "ghost-b"
general = "ghost-c"
"#;
        let diags = load_model(text).unwrap_err();
        let dangling: Vec<_> = diags
            .iter()
            .filter(|d| d.rule == "ingest.dangling-ref")
            .collect();
        assert_eq!(dangling.len(), 3, "{diags:?}");
        assert!(diags.iter().all(|d| d.severity == Severity::Error));
    }

    #[test]
    fn rejects_unknown_tag_name() {
        let text = r#"
format_version = "1"

[[element]]
id = "pkg"
kind = "package"
name = "d"

[[application]]
element = "pkg"
stereotype = "domain"
tags.parameters = []
"#;
        let diags = load_model(text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, "ingest.unknown-tag");
        assert!(diags[0].message.contains("domain"));
    }

    #[test]
    fn tag_value_shapes_round_trip() {
        let text = r#"
format_version = "1"

[[element]]
id = "pkg"
kind = "package"
name = "d \"quoted\"\nsecond line"

[[element]]
id = "cls"
kind = "class"
name = "Rivet"
owner = "pkg"

[[element]]
id = "act"
kind = "activity"
owner = "pkg"

[[element]]
id = "move"
kind = "action-node"
name = "Move"
owner = "act"

[[element]]
id = "f"
kind = "flow-node"
name = "Dist"
owner = "act"

[[flow]]
id = "f"
flavor = "object"
source = "act"
target = "move"

[[application]]
element = "f"
stereotype = "function"
tags.parameters = [{ name = "a", type = "cls" }, { name = "b", type = "cls" }]
tags.arguments = ["a", "b"]
tags.role = "cost"

[[application]]
element = "move"
stereotype = "action"
tags.parameters = []
"#;
        let m = load_model(text).unwrap();
        let app = m.stereotype_of(&"move".into()).unwrap().unwrap();
        // Empty sequence normalizes to the empty parameter list.
        assert_eq!(app.params_tag(), Some(&[][..]));
        let saved = save_model(&m);
        assert_eq!(load_model(&saved).unwrap(), m);
    }

    #[test]
    fn number_and_bool_tags() {
        let text = r#"
format_version = "1"

[[element]]
id = "act"
kind = "activity"

[[element]]
id = "a1"
kind = "action-node"
owner = "act"

[[element]]
id = "f"
kind = "flow-node"
owner = "act"
name = "P"

[[flow]]
id = "f"
flavor = "object"
source = "act"
target = "a1"

[[application]]
element = "f"
stereotype = "predicate"
tags.negated = true
"#;
        let m = load_model(text).unwrap();
        let app = m.stereotype_of(&"f".into()).unwrap().unwrap();
        assert_eq!(app.tag("negated"), Some(&TagValue::Str("true".into())));
    }

    #[test]
    fn float_formatting_is_valid_toml() {
        assert_eq!(toml_float(3.0), "3.0");
        assert_eq!(toml_float(0.25), "0.25");
        assert_eq!(toml_float(-2.0), "-2.0");
        let huge = toml_float(1e300);
        assert!(huge.contains('e') || huge.contains('.'));
    }
}
