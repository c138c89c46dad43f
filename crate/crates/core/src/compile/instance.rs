//! Instance data: the problem-side half of a planning task, loaded
//! from `.pi1` files.
//!
//! The model describes what actions exist; an instance file says which
//! objects exist right now, what holds initially, and what should hold
//! at the end. The on-disk form follows the same TOML conventions as
//! the model interchange format: a `format_version` marker plus
//! array-of-table sections, read strictly so typos are rejected
//! instead of ignored.

use crate::diag::{position_of, Diagnostic};
use serde::Deserialize;

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    format_version: String,
    problem: String,
    #[serde(default, rename = "object")]
    objects: Vec<ObjectDoc>,
    #[serde(default, rename = "init")]
    init: Vec<InitDoc>,
    #[serde(default, rename = "init_value")]
    init_values: Vec<InitValueDoc>,
    #[serde(default, rename = "goal")]
    goal: Vec<GoalDoc>,
    #[serde(default)]
    metric: Option<MetricDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    name: String,
    #[serde(rename = "type")]
    ty: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitDoc {
    predicate: String,
    #[serde(default)]
    args: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitValueDoc {
    function: String,
    #[serde(default)]
    args: Vec<String>,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalDoc {
    predicate: String,
    #[serde(default)]
    args: Vec<String>,
    #[serde(default)]
    negated: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricDoc {
    minimize: String,
    #[serde(default)]
    args: Vec<String>,
}

/// Everything a problem needs beyond the domain. Names are plain
/// strings here; `compile_problem` resolves them against a compiled
/// domain and reports what doesn't fit.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceData {
    pub objects: Vec<ObjectDecl>,
    pub init_predicates: Vec<GroundAtom>,
    pub init_function_values: Vec<FunctionValue>,
    pub goal: Vec<GoalLiteral>,
    pub metric: Option<MetricSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDecl {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionValue {
    pub function: String,
    pub args: Vec<String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalLiteral {
    pub predicate: String,
    pub args: Vec<String>,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub minimize: String,
    pub args: Vec<String>,
}

/// Reads a `.pi1` document; returns the problem name and its data.
pub fn load_instance(text: &str) -> Result<(String, InstanceData), Vec<Diagnostic>> {
    let doc: Doc = toml::from_str(text).map_err(|err| {
        let mut d = Diagnostic::error("instance.syntax", err.message());
        if let Some(span) = err.span() {
            let pos = position_of(text, span.start);
            d = d.at_position(pos.line, pos.column);
        }
        vec![d]
    })?;

    if doc.format_version != FORMAT_VERSION {
        return Err(vec![Diagnostic::error(
            "instance.version",
            format!(
                "unsupported format_version `{}`; this reader understands `{}`",
                doc.format_version, FORMAT_VERSION
            ),
        )]);
    }

    let data = InstanceData {
        objects: doc
            .objects
            .into_iter()
            .map(|o| ObjectDecl {
                name: o.name,
                ty: o.ty,
            })
            .collect(),
        init_predicates: doc
            .init
            .into_iter()
            .map(|i| GroundAtom {
                predicate: i.predicate,
                args: i.args,
            })
            .collect(),
        init_function_values: doc
            .init_values
            .into_iter()
            .map(|v| FunctionValue {
                function: v.function,
                args: v.args,
                value: v.value,
            })
            .collect(),
        goal: doc
            .goal
            .into_iter()
            .map(|g| GoalLiteral {
                predicate: g.predicate,
                args: g.args,
                negated: g.negated,
            })
            .collect(),
        metric: doc.metric.map(|m| MetricSpec {
            minimize: m.minimize,
            args: m.args,
        }),
    };
    Ok((doc.problem, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_RIVETS: &str = r#"
format_version = "1"
problem = "two-rivets"

[[object]]
name = "r1"
type = "Rivet"

[[object]]
name = "r2"
type = "Rivet"

[[init]]
predicate = "MovedToNextRivet"
args = ["r1"]

[[init]]
predicate = "EnergySupply"

[[init_value]]
function = "RivetDistanceInformation"
args = ["r1", "r2"]
value = 5

[[goal]]
predicate = "CollarScrewed"
args = ["r1"]

[[goal]]
predicate = "MovedToNextRivet"
args = ["r2"]
negated = true

[metric]
minimize = "total-cost"
"#;

    #[test]
    fn loads_a_full_instance() {
        let (name, data) = load_instance(TWO_RIVETS).unwrap();
        assert_eq!(name, "two-rivets");
        assert_eq!(data.objects.len(), 2);
        assert_eq!(data.objects[0].ty, "Rivet");
        assert_eq!(data.init_predicates[1].predicate, "EnergySupply");
        assert!(data.init_predicates[1].args.is_empty());
        // Integer literals are fine for numeric values.
        assert_eq!(data.init_function_values[0].value, 5.0);
        assert!(data.goal[1].negated);
        assert!(!data.goal[0].negated);
        assert_eq!(data.metric.as_ref().unwrap().minimize, "total-cost");
        assert!(data.metric.as_ref().unwrap().args.is_empty());
    }

    #[test]
    fn minimal_instance_defaults_everything() {
        let (name, data) = load_instance("format_version = \"1\"\nproblem = \"p\"\n").unwrap();
        assert_eq!(name, "p");
        assert!(data.objects.is_empty());
        assert!(data.goal.is_empty());
        assert!(data.metric.is_none());
    }

    #[test]
    fn rejects_unknown_keys_with_position() {
        let text = "format_version = \"1\"\nproblem = \"p\"\n\n[[object]]\nname = \"r1\"\ntype = \"Rivet\"\ncolour = \"red\"\n";
        let diags = load_instance(text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, "instance.syntax");
        assert!(diags[0].position.is_some());
        assert!(diags[0].message.contains("colour"), "{}", diags[0].message);
    }

    #[test]
    fn rejects_wrong_version() {
        let diags = load_instance("format_version = \"0\"\nproblem = \"p\"\n").unwrap_err();
        assert_eq!(diags[0].rule, "instance.version");
    }

    #[test]
    fn missing_problem_name_is_a_syntax_error() {
        let diags = load_instance("format_version = \"1\"\n").unwrap_err();
        assert_eq!(diags[0].rule, "instance.syntax");
        assert!(diags[0].message.contains("problem"), "{}", diags[0].message);
    }
}
