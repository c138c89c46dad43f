//! Cost-optimal search over a ground task.
//!
//! Uniform-cost (Dijkstra) search settles every state whose cheapest
//! cost from the initial state is at most the optimum, recording the
//! explored edges. A second pass over the recorded graph computes, for
//! each settled state, the exact remaining cost to a goal. The plan is
//! then rebuilt front to back, always taking the alphabetically first
//! action that keeps the remaining cost exact and does not revisit a
//! state on the current path — so among all minimum-cost plans that
//! never repeat a state, the returned one has the lexicographically
//! least action-name sequence. The result is fully deterministic.

use super::ground::GroundTask;
use super::plan::Plan;
use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

/// Relative slack used when comparing path costs; action costs are
/// exact machine numbers, so this only absorbs summation-order noise.
pub const COST_TOLERANCE: f64 = 1e-9;

/// Default bound on the number of state expansions.
pub const DEFAULT_EXPANSION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Solved(Plan),
    /// Complete exploration found no goal state.
    Unsolvable,
    /// The expansion cap was hit before optimality was proven.
    ResourceLimit,
}

fn slack(scale: f64) -> f64 {
    COST_TOLERANCE * scale.abs().max(1.0)
}

#[derive(PartialEq)]
struct QueueEntry {
    cost: f64,
    seq: u64,
    state: u32,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.seq.cmp(&other.seq))
            .then(self.state.cmp(&other.state))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Space {
    states: Vec<Box<[u32]>>,
    index: HashMap<Box<[u32]>, u32>,
    dist: Vec<f64>,
    settled: Vec<bool>,
    /// Incoming edges per state: (source state, action index).
    edges_in: Vec<Vec<(u32, u32)>>,
}

impl Space {
    fn new(init: Box<[u32]>) -> Self {
        let mut index = HashMap::new();
        index.insert(init.clone(), 0);
        Space {
            states: vec![init],
            index,
            dist: vec![0.0],
            settled: vec![false],
            edges_in: vec![Vec::new()],
        }
    }

    fn intern(&mut self, state: Box<[u32]>) -> u32 {
        if let Some(&id) = self.index.get(&state) {
            return id;
        }
        let id = self.states.len() as u32;
        self.index.insert(state.clone(), id);
        self.states.push(state);
        self.dist.push(f64::INFINITY);
        self.settled.push(false);
        self.edges_in.push(Vec::new());
        id
    }
}

pub fn solve(task: &GroundTask, cap: usize) -> SolveOutcome {
    // The walk needs actions in name order; don't require callers to
    // pre-sort.
    let mut order: Vec<usize> = (0..task.actions.len()).collect();
    order.sort_by(|&a, &b| {
        let (an, bn) = (&task.actions[a].name, &task.actions[b].name);
        an.to_ascii_lowercase()
            .cmp(&bn.to_ascii_lowercase())
            .then_with(|| an.cmp(bn))
    });

    let mut space = Space::new(task.init.clone());
    let mut heap: BinaryHeap<Reverse<QueueEntry>> = BinaryHeap::new();
    heap.push(Reverse(QueueEntry {
        cost: 0.0,
        seq: 0,
        state: 0,
    }));
    let mut seq: u64 = 1;
    let mut expansions: usize = 0;
    let mut best: Option<f64> = None;
    let mut goal_states: Vec<u32> = Vec::new();

    while let Some(Reverse(QueueEntry { cost: g, state: s, .. })) = heap.pop() {
        let si = s as usize;
        if space.settled[si] {
            continue;
        }
        if let Some(c) = best {
            if g > c + slack(c) {
                break;
            }
        }
        space.settled[si] = true;
        if task.is_goal(&space.states[si]) {
            // Plans end at their first goal state, so goal states are
            // never expanded.
            goal_states.push(s);
            best.get_or_insert(g);
            continue;
        }
        expansions += 1;
        if expansions > cap {
            return SolveOutcome::ResourceLimit;
        }
        let current = space.states[si].clone();
        for &ai in &order {
            let action = &task.actions[ai];
            if !action.applicable(&current) {
                continue;
            }
            let succ = action.apply(&current);
            let t = space.intern(succ);
            let ti = t as usize;
            space.edges_in[ti].push((s, ai as u32));
            let nd = g + action.cost;
            if !space.settled[ti] && nd < space.dist[ti] {
                space.dist[ti] = nd;
                heap.push(Reverse(QueueEntry {
                    cost: nd,
                    seq,
                    state: t,
                }));
                seq += 1;
            }
        }
    }

    if best.is_none() {
        return SolveOutcome::Unsolvable;
    }

    // Exact cost-to-goal over the recorded graph, from the goals back.
    let mut to_goal = vec![f64::INFINITY; space.states.len()];
    let mut done = vec![false; space.states.len()];
    let mut back: BinaryHeap<Reverse<QueueEntry>> = BinaryHeap::new();
    for &gs in &goal_states {
        to_goal[gs as usize] = 0.0;
        back.push(Reverse(QueueEntry {
            cost: 0.0,
            seq: 0,
            state: gs,
        }));
    }
    while let Some(Reverse(QueueEntry { cost: h, state: t, .. })) = back.pop() {
        let ti = t as usize;
        if done[ti] {
            continue;
        }
        done[ti] = true;
        for &(s, ai) in &space.edges_in[ti] {
            let si = s as usize;
            let cand = h + task.actions[ai as usize].cost;
            if !done[si] && cand < to_goal[si] {
                to_goal[si] = cand;
                back.push(Reverse(QueueEntry {
                    cost: cand,
                    seq,
                    state: s,
                }));
                seq += 1;
            }
        }
    }

    // Front-to-back reconstruction. At each state the remaining budget
    // equals the recorded cost-to-goal, so for at least one successor
    // the check below holds with exact float equality; the tolerance
    // only admits differently-rounded ties. Dead ends are impossible in
    // exact arithmetic but the walk backtracks anyway, so a rounding
    // quirk degrades to a different optimal plan instead of a panic.
    struct Frame {
        state: u32,
        budget: f64,
        next: usize,
    }
    let mut frames = vec![Frame {
        state: 0,
        budget: to_goal[0],
        next: 0,
    }];
    let mut on_path: HashSet<u32> = HashSet::from([0]);
    let mut steps: Vec<usize> = Vec::new();

    loop {
        let top = frames.len() - 1;
        let si = frames[top].state as usize;
        if task.is_goal(&space.states[si]) {
            break;
        }
        let mut advanced = false;
        while frames[top].next < order.len() {
            let ai = order[frames[top].next];
            frames[top].next += 1;
            let action = &task.actions[ai];
            if !action.applicable(&space.states[si]) {
                continue;
            }
            let succ = action.apply(&space.states[si]);
            let Some(&t) = space.index.get(&succ) else {
                continue;
            };
            let h = to_goal[t as usize];
            let budget = frames[top].budget;
            if !h.is_finite() || (action.cost + h - budget).abs() > slack(budget) {
                continue;
            }
            if !on_path.insert(t) {
                continue;
            }
            steps.push(ai);
            frames.push(Frame {
                state: t,
                budget: h,
                next: 0,
            });
            advanced = true;
            break;
        }
        if !advanced {
            let frame = frames.pop().expect("frame stack is non-empty");
            on_path.remove(&frame.state);
            steps.pop();
            if frames.is_empty() {
                // Unreachable with exact arithmetic; see above.
                return SolveOutcome::ResourceLimit;
            }
        }
    }

    let total_cost = steps.iter().map(|&ai| task.actions[ai].cost).sum();
    SolveOutcome::Solved(Plan { steps, total_cost })
}
