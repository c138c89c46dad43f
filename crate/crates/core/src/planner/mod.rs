//! A desk-scale cost-optimal planner: grounding, uniform-cost search
//! with deterministic plan reconstruction, and plan validation.

pub mod ground;
pub mod plan;
pub mod search;

pub use ground::{ground, GroundAction, GroundTask};
pub use plan::{parse_plan, print_plan, validate_plan, Plan, PlanReport};
pub use search::{solve, SolveOutcome, COST_TOLERANCE, DEFAULT_EXPANSION_CAP};
