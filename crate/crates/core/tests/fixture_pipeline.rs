//! Drives every committed fixture through the full library pipeline —
//! load, validate, compile, print, reparse, ground, solve, check — and
//! holds the results to the expectations recorded next to each fixture.

use planc_core::compile::{compile_domain, compile_problem, load_instance};
use planc_core::fixtures::{fixture_catalog, Fixture};
use planc_core::ingest::load_model;
use planc_core::model::ModelGraph;
use planc_core::pddl::{parse_domain, parse_problem, print_domain, print_problem, PddlDomain, PddlProblem};
use planc_core::planner::{ground, solve, validate_plan, GroundTask, PlanReport, SolveOutcome, DEFAULT_EXPANSION_CAP};
use planc_core::validate::{validate, RuleSet};
use std::fs;

fn read(path: &std::path::Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|err| panic!("read {}: {err}", path.display()))
}

fn load_validated_model(f: &Fixture) -> ModelGraph {
    let model = load_model(&read(&f.model_path()))
        .unwrap_or_else(|d| panic!("{}: model does not load: {d:?}", f.name));
    let diags = validate(&model, &RuleSet::generation());
    assert!(diags.is_empty(), "{}: expected clean validation, got {diags:?}", f.name);
    model
}

fn compile_fixture(f: &Fixture, model: &ModelGraph) -> (PddlDomain, Option<PddlProblem>) {
    let domains = model.domains();
    assert_eq!(domains.len(), 1, "{}: fixtures carry one domain package", f.name);
    let domain = compile_domain(model, &domains[0].id)
        .unwrap_or_else(|d| panic!("{}: domain does not compile: {d:?}", f.name));
    let problem = f.instance_path().map(|path| {
        let (name, data) = load_instance(&read(&path))
            .unwrap_or_else(|d| panic!("{}: instance does not load: {d:?}", f.name));
        compile_problem(&domain, &data, &name)
            .unwrap_or_else(|d| panic!("{}: problem does not compile: {d:?}", f.name))
    });
    (domain, problem)
}

fn expected_task(f: &Fixture) -> (GroundTask, Vec<String>, f64) {
    let model = load_validated_model(f);
    let (domain, problem) = compile_fixture(f, &model);
    let problem = problem.expect("fixture ships an instance");
    let task = ground(&domain, &problem)
        .unwrap_or_else(|d| panic!("{}: grounding failed: {d:?}", f.name));
    let plan = f.expect.plan.clone().expect("solvable fixture records its plan");
    let cost = f.expect.optimal_cost.expect("solvable fixture records its cost");
    (task, plan, cost)
}

#[test]
fn positive_fixtures_compile_to_their_recorded_domain_names() {
    for f in fixture_catalog().iter().filter(|f| f.is_positive()) {
        let model = load_validated_model(f);
        let (domain, _) = compile_fixture(f, &model);
        let want = f.expect.domain.as_deref().expect("positive fixtures record the domain name");
        assert_eq!(domain.name.as_str(), want, "{}", f.name);
    }
}

#[test]
fn compiled_fixture_output_reparses_to_the_same_ast() {
    for f in fixture_catalog().iter().filter(|f| f.is_positive()) {
        let model = load_validated_model(f);
        let (domain, problem) = compile_fixture(f, &model);
        let domain_text = print_domain(&domain);
        let domain_back = parse_domain(&domain_text)
            .unwrap_or_else(|d| panic!("{}: emitted domain does not reparse: {d:?}", f.name));
        assert_eq!(domain, domain_back, "{}: domain round-trip", f.name);
        if let Some(problem) = problem {
            let problem_text = print_problem(&problem);
            let problem_back = parse_problem(&problem_text, &domain)
                .unwrap_or_else(|d| panic!("{}: emitted problem does not reparse: {d:?}", f.name));
            assert_eq!(problem, problem_back, "{}: problem round-trip", f.name);
        }
    }
}

#[test]
fn grounding_matches_recorded_action_counts() {
    for f in fixture_catalog().iter().filter(|f| f.instance_path().is_some()) {
        let (task, _, _) = expected_task(f);
        let want = f.expect.ground_actions.expect("recorded");
        assert_eq!(task.actions.len(), want, "{}", f.name);
    }
}

#[test]
fn solver_reproduces_the_recorded_plans_exactly() {
    for f in fixture_catalog().iter().filter(|f| f.instance_path().is_some()) {
        let (task, want_plan, want_cost) = expected_task(f);
        let SolveOutcome::Solved(plan) = solve(&task, DEFAULT_EXPANSION_CAP) else {
            panic!("{}: expected a solution", f.name);
        };
        assert_eq!(plan.total_cost, want_cost, "{}: optimal cost", f.name);
        let steps: Vec<String> = plan.steps.iter().map(|&i| task.actions[i].display()).collect();
        assert_eq!(steps, want_plan, "{}: canonical plan", f.name);
    }
}

#[test]
fn recorded_plans_validate_at_their_recorded_cost() {
    for f in fixture_catalog().iter().filter(|f| f.instance_path().is_some()) {
        let (task, want_plan, want_cost) = expected_task(f);
        match validate_plan(&task, &want_plan) {
            PlanReport::Accepted { cost } => {
                assert_eq!(cost, want_cost, "{}: replay cost", f.name)
            }
            other => panic!("{}: recorded plan rejected: {other:?}", f.name),
        }
    }
}

#[test]
fn tool_change_counts_match_the_recorded_plans() {
    for f in fixture_catalog().iter().filter(|f| f.expect.tool_changes.is_some()) {
        let plan = f.expect.plan.as_ref().expect("plan recorded");
        let changes = plan.iter().filter(|s| s.starts_with("(ChangeEndEffector ")).count();
        assert_eq!(changes, f.expect.tool_changes.unwrap(), "{}", f.name);
    }
}

#[test]
fn negative_fixtures_trip_exactly_their_designated_rule() {
    for f in fixture_catalog().iter().filter(|f| !f.is_positive()) {
        let rule = f.expect.rule.as_deref().expect("negative fixtures name a rule");
        let text = read(&f.model_path());
        if rule.starts_with("ingest.") {
            let diags = load_model(&text)
                .err()
                .unwrap_or_else(|| panic!("{}: expected a load failure", f.name));
            assert!(
                diags.iter().all(|d| d.rule == rule),
                "{}: stray rules in {diags:?}",
                f.name
            );
            assert!(!diags.is_empty(), "{}", f.name);
        } else {
            let model = load_model(&text)
                .unwrap_or_else(|d| panic!("{}: model should load: {d:?}", f.name));
            let diags = validate(&model, &RuleSet::generation());
            assert!(!diags.is_empty(), "{}: expected findings", f.name);
            assert!(
                diags.iter().all(|d| d.rule == rule),
                "{}: stray rules in {diags:?}",
                f.name
            );
        }
    }
}

#[test]
fn six_rivet_plan_changes_tools_once_and_screws_types_contiguously() {
    let f = fixture_catalog()
        .into_iter()
        .find(|f| f.name == "collar-screwing-6rivets")
        .expect("fixture committed");
    let (task, _, _) = expected_task(&f);
    let SolveOutcome::Solved(plan) = solve(&task, DEFAULT_EXPANSION_CAP) else {
        panic!("expected a solution");
    };
    let steps: Vec<String> = plan.steps.iter().map(|&i| task.actions[i].display()).collect();
    let changes = steps.iter().filter(|s| s.starts_with("(ChangeEndEffector ")).count();
    assert_eq!(changes, 1, "one hardware reconfiguration: {steps:?}");
    // All type-A collars are screwed before the change, all type-B after.
    let change_at = steps.iter().position(|s| s.starts_with("(ChangeEndEffector ")).unwrap();
    let screw_kind = |s: &String| {
        s.strip_prefix("(ScrewCollarType")
            .and_then(|rest| rest.chars().next())
    };
    let before: Vec<char> = steps[..change_at].iter().filter_map(screw_kind).collect();
    let after: Vec<char> = steps[change_at..].iter().filter_map(screw_kind).collect();
    assert!(before.iter().all(|&k| k == 'A'), "{steps:?}");
    assert!(after.iter().all(|&k| k == 'B'), "{steps:?}");
    assert_eq!(before.len() + after.len(), 6, "{steps:?}");
}

#[test]
fn plan_objects_and_goals_come_from_the_instance_files() {
    // Spot-check one fixture's problem side end to end.
    let f = fixture_catalog()
        .into_iter()
        .find(|f| f.name == "assemble-part")
        .expect("fixture committed");
    let model = load_validated_model(&f);
    let (_, problem) = compile_fixture(&f, &model);
    let problem = problem.expect("assemble-part ships an instance");
    assert_eq!(problem.name.as_str(), "assemble-one");
    let objects: Vec<&str> = problem.objects.iter().map(|o| o.name.as_str()).collect();
    assert_eq!(objects, ["p1", "t1"]);
    assert!(problem.metric.is_none(), "no cost flows, no metric");
}
