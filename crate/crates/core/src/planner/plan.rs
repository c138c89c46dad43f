//! Plans: the solver's output, a line-oriented file format, and
//! replay validation against a ground task.
//!
//! A plan file holds one `(action arg1 arg2)` per line; blank lines
//! and lines starting with `;` are comments. The printer appends a
//! `; cost = N` trailer, which the parser skips like any comment —
//! validation always recomputes the cost.

use super::ground::GroundTask;
use crate::diag::{sort_canonical, Diagnostic};
use crate::pddl::fmt_number;

const RULE_SYNTAX: &str = "plan.syntax";

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// Indices into the task's action list, in execution order.
    pub steps: Vec<usize>,
    /// Sum of the step costs.
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanReport {
    Accepted {
        cost: f64,
    },
    /// A step names no ground action of the task. Steps are 1-based.
    UnknownAction {
        step: usize,
        name: String,
    },
    /// A step's preconditions do not hold in the state it executes in.
    RejectedStep {
        step: usize,
        action: String,
        unmet: Vec<String>,
    },
    /// Every step executes, but the final state misses the goal.
    RejectedGoal {
        unmet: Vec<String>,
    },
}

pub fn print_plan(task: &GroundTask, plan: &Plan) -> String {
    let mut out = String::new();
    for &ai in &plan.steps {
        out.push_str(&task.actions[ai].display());
        out.push('\n');
    }
    out.push_str("; cost = ");
    out.push_str(&fmt_number(plan.total_cost));
    out.push('\n');
    out
}

/// Extracts the step names from a plan file. Purely syntactic: names
/// are resolved against a task by `validate_plan`.
pub fn parse_plan(text: &str) -> Result<Vec<String>, Vec<Diagnostic>> {
    let mut steps = Vec::new();
    let mut diags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let inner = line
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .filter(|x| !x.contains('(') && !x.contains(')'));
        let Some(inner) = inner else {
            diags.push(
                Diagnostic::error(
                    RULE_SYNTAX,
                    format!("expected one `(action arg1 arg2)` per line, got `{line}`"),
                )
                .at_position(i as u32 + 1, 1),
            );
            continue;
        };
        let tokens: Vec<&str> = inner.split_whitespace().collect();
        if tokens.is_empty() {
            diags.push(
                Diagnostic::error(RULE_SYNTAX, "empty step")
                    .at_position(i as u32 + 1, 1),
            );
            continue;
        }
        steps.push(tokens.join(" "));
    }
    if diags.is_empty() {
        Ok(steps)
    } else {
        sort_canonical(&mut diags);
        Err(diags)
    }
}

/// Replays `steps` from the initial state. Names are matched against
/// the task case-insensitively.
pub fn validate_plan(task: &GroundTask, steps: &[String]) -> PlanReport {
    let mut state = task.init.clone();
    let mut cost = 0.0;
    for (i, raw) in steps.iter().enumerate() {
        let Some(ai) = task.action_named(raw) else {
            return PlanReport::UnknownAction {
                step: i + 1,
                name: raw.trim().to_string(),
            };
        };
        let action = &task.actions[ai];
        if !action.applicable(&state) {
            let mut unmet: Vec<String> = action
                .pre_pos
                .iter()
                .filter(|p| state.binary_search(p).is_err())
                .map(|&id| task.atoms[id as usize].clone())
                .collect();
            unmet.extend(
                action
                    .pre_neg
                    .iter()
                    .filter(|n| state.binary_search(n).is_ok())
                    .map(|&id| format!("(not {})", task.atoms[id as usize])),
            );
            return PlanReport::RejectedStep {
                step: i + 1,
                action: action.display(),
                unmet,
            };
        }
        cost += action.cost;
        state = action.apply(&state);
    }
    let mut unmet: Vec<String> = task
        .goal_pos
        .iter()
        .filter(|p| state.binary_search(p).is_err())
        .map(|&id| task.atoms[id as usize].clone())
        .collect();
    unmet.extend(
        task.goal_neg
            .iter()
            .filter(|n| state.binary_search(n).is_ok())
            .map(|&id| format!("(not {})", task.atoms[id as usize])),
    );
    if unmet.is_empty() {
        PlanReport::Accepted { cost }
    } else {
        PlanReport::RejectedGoal { unmet }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::ground::GroundAction;

    fn two_step_task() -> GroundTask {
        GroundTask {
            atoms: vec!["(at a)".into(), "(at b)".into(), "(fueled)".into()],
            actions: vec![
                GroundAction {
                    name: "Drive a b".into(),
                    pre_pos: vec![0, 2],
                    pre_neg: vec![],
                    add: vec![1],
                    del: vec![0],
                    cost: 3.0,
                },
                GroundAction {
                    name: "Fuel".into(),
                    pre_pos: vec![],
                    pre_neg: vec![2],
                    add: vec![2],
                    del: vec![],
                    cost: 1.0,
                },
            ],
            init: vec![0].into_boxed_slice(),
            goal_pos: vec![1],
            goal_neg: vec![],
        }
    }

    #[test]
    fn prints_steps_and_cost_trailer() {
        let task = two_step_task();
        let plan = Plan {
            steps: vec![1, 0],
            total_cost: 4.0,
        };
        assert_eq!(print_plan(&task, &plan), "(Fuel)\n(Drive a b)\n; cost = 4\n");
    }

    #[test]
    fn printed_plans_parse_back() {
        let task = two_step_task();
        let plan = Plan {
            steps: vec![1, 0],
            total_cost: 4.0,
        };
        let steps = parse_plan(&print_plan(&task, &plan)).unwrap();
        assert_eq!(steps, ["Fuel", "Drive a b"]);
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let steps = parse_plan("; header\n\n  (Fuel)  \n; cost = 4\n").unwrap();
        assert_eq!(steps, ["Fuel"]);
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        let diags = parse_plan("(Fuel\n(Drive (a) b)\n()\n").unwrap_err();
        assert_eq!(diags.len(), 3);
        assert!(diags.iter().all(|d| d.rule == "plan.syntax"));
        assert_eq!(diags[0].position.unwrap().line, 1);
    }

    #[test]
    fn accepts_a_working_plan() {
        let task = two_step_task();
        let report = validate_plan(&task, &["fuel".into(), "DRIVE A B".into()]);
        assert_eq!(report, PlanReport::Accepted { cost: 4.0 });
    }

    #[test]
    fn unknown_action_names_the_step() {
        let task = two_step_task();
        let report = validate_plan(&task, &["Fuel".into(), "Fly a b".into()]);
        assert_eq!(
            report,
            PlanReport::UnknownAction {
                step: 2,
                name: "Fly a b".into()
            }
        );
    }

    #[test]
    fn unmet_preconditions_reject_the_step() {
        let task = two_step_task();
        let report = validate_plan(&task, &["Drive a b".into()]);
        match report {
            PlanReport::RejectedStep {
                step,
                action,
                unmet,
            } => {
                assert_eq!(step, 1);
                assert_eq!(action, "(Drive a b)");
                assert_eq!(unmet, ["(fueled)"]);
            }
            other => panic!("unexpected report: {other:?}"),
        }
    }

    #[test]
    fn violated_negative_precondition_is_reported() {
        let task = two_step_task();
        let report = validate_plan(&task, &["Fuel".into(), "Fuel".into()]);
        match report {
            PlanReport::RejectedStep { step, unmet, .. } => {
                assert_eq!(step, 2);
                assert_eq!(unmet, ["(not (fueled))"]);
            }
            other => panic!("unexpected report: {other:?}"),
        }
    }

    #[test]
    fn missed_goal_is_reported_with_the_missing_atoms() {
        let task = two_step_task();
        let report = validate_plan(&task, &["Fuel".into()]);
        assert_eq!(
            report,
            PlanReport::RejectedGoal {
                unmet: vec!["(at b)".into()]
            }
        );
    }

    #[test]
    fn empty_plan_validates_against_a_satisfied_goal() {
        let mut task = two_step_task();
        task.goal_pos = vec![0];
        assert_eq!(validate_plan(&task, &[]), PlanReport::Accepted { cost: 0.0 });
    }
}
