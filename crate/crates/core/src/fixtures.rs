//! Catalog of the reference models committed under `fixtures/` at the
//! repository root.
//!
//! Each fixture directory holds a model (`model.pm1`), optionally an
//! instance (`instance.pi1`) and golden PDDL output (`golden/`), plus a
//! machine-readable `expect.txt` describing what loading, compiling,
//! and solving it should produce. Tests and the command-line pipeline
//! checks both consume this catalog, so expectations live in one place.

use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Whether a fixture is supposed to make it through the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectKind {
    /// Loads, validates cleanly, compiles, and (with an instance) solves.
    Positive,
    /// Trips exactly the diagnostic rule named in `rule`.
    Negative,
}

/// Parsed `expect.txt`: the recorded outcomes for one fixture. Fields
/// beyond `kind` apply only where they make sense (a model-only
/// fixture has no plan, a negative fixture has no compiled domain) and
/// stay `None` otherwise.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub kind: ExpectKind,
    /// Compiled domain name.
    pub domain: Option<String>,
    /// Ground action count after static pruning.
    pub ground_actions: Option<usize>,
    /// Optimal plan cost; costs in the fixtures are integer-valued, so
    /// comparisons are exact.
    pub optimal_cost: Option<f64>,
    /// Number of `ChangeEndEffector` steps in the canonical plan.
    pub tool_changes: Option<usize>,
    /// The canonical plan, one `(action args…)` string per step.
    pub plan: Option<Vec<String>>,
    /// For negative fixtures: the diagnostic rule the model trips.
    pub rule: Option<String>,
}

impl Expectations {
    /// Exit status the `validate` subcommand should produce: 0 clean,
    /// 1 when the file cannot even be loaded (`ingest.*` rules), 2 for
    /// profile findings on a loadable model.
    pub fn validate_exit(&self) -> i32 {
        match self.kind {
            ExpectKind::Positive => 0,
            ExpectKind::Negative => match &self.rule {
                Some(rule) if rule.starts_with("ingest.") => 1,
                _ => 2,
            },
        }
    }
}

/// One committed reference model and everything recorded about it.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub dir: PathBuf,
    pub expect: Expectations,
}

impl Fixture {
    pub fn model_path(&self) -> PathBuf {
        self.dir.join("model.pm1")
    }

    /// The instance file, if this fixture ships one.
    pub fn instance_path(&self) -> Option<PathBuf> {
        let p = self.dir.join("instance.pi1");
        p.exists().then_some(p)
    }

    pub fn golden_domain_path(&self) -> PathBuf {
        self.dir.join("golden").join("domain.pddl")
    }

    pub fn golden_problem_path(&self) -> PathBuf {
        self.dir.join("golden").join("problem.pddl")
    }

    pub fn is_positive(&self) -> bool {
        self.expect.kind == ExpectKind::Positive
    }
}

/// Root of the committed fixture tree.
pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Enumerates the committed fixtures in name order. Panics on a broken
/// checkout (missing tree, unreadable or malformed `expect.txt`):
/// callers are tests and pipeline checks, where the loudest possible
/// failure is the useful one.
pub fn fixture_catalog() -> Vec<Fixture> {
    let root = fixture_root();
    let entries = fs::read_dir(&root)
        .unwrap_or_else(|err| panic!("cannot read fixture root {}: {err}", root.display()));
    let mut fixtures: Vec<Fixture> = entries
        .map(|entry| entry.expect("cannot enumerate fixture directory").path())
        .filter(|path| path.is_dir())
        .map(|dir| {
            let name = dir
                .file_name()
                .expect("fixture directory has a name")
                .to_string_lossy()
                .into_owned();
            let expect_path = dir.join("expect.txt");
            let text = fs::read_to_string(&expect_path).unwrap_or_else(|err| {
                panic!("cannot read {}: {err}", expect_path.display())
            });
            let expect: Expectations = toml::from_str(&text).unwrap_or_else(|err| {
                panic!("malformed expectations in {}: {err}", expect_path.display())
            });
            Fixture { name, dir, expect }
        })
        .collect();
    fixtures.sort_by(|a, b| a.name.cmp(&b.name));
    fixtures
}
