use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use super::analytic::analytic_expansion;
use super::{PlanError, PlannerConfig, SearchReport};
use crate::geometry::Vec3;
use crate::spatial::CollisionQuery;
use crate::state::{propagate_unchecked, UavState};
use crate::trajectory::{sample_times, ConstantAccelSegment, Segment, Trajectory};

/// Within this distance of the goal every popped node tries an analytic expansion.
const NEAR_GOAL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchNode {
    pub state: UavState,
    pub g: f64,
    pub f: f64,
    /// Arena index of the parent; `None` for the root.
    pub parent: Option<usize>,
    /// Control applied on the incoming edge.
    pub u: Vec3,
}

/// A successful search.
#[derive(Debug, Clone)]
pub struct Plan {
    pub trajectory: Trajectory,
    pub report: SearchReport,
    /// Node chain from the root to the node the analytic expansion left from.
    pub nodes: Vec<SearchNode>,
}

/// `(‖u‖² + rho) · T_s`.
pub fn edge_cost(u: &Vec3, cfg: &PlannerConfig) -> f64 {
    (u.norm_squared() + cfg.time_weight) * cfg.limits.primitive_duration
}

/// Time-to-go lower bound scaled by the time weight.
pub fn heuristic(state: &UavState, goal: &Vec3, cfg: &PlannerConfig) -> f64 {
    (state.p - goal).norm() / cfg.limits.v_max * cfg.time_weight
}

/// The 27 controls `{-a_max, 0, a_max}³`, x-major.
fn controls(a_max: f64) -> impl Iterator<Item = Vec3> {
    let levels = [-a_max, 0.0, a_max];
    levels.into_iter().flat_map(move |x| {
        levels
            .into_iter()
            .flat_map(move |y| levels.into_iter().map(move |z| Vec3::new(x, y, z)))
    })
}

/// Children of `node` reachable by a feasible, collision-free primitive.
///
/// `parent` is the arena index recorded in the children.
pub fn expand<M: CollisionQuery + ?Sized>(
    node: &SearchNode,
    parent: Option<usize>,
    goal: &Vec3,
    cfg: &PlannerConfig,
    map: &M,
) -> Vec<SearchNode> {
    let mut children = Vec::with_capacity(27);
    if map.any_within(&node.state.p, cfg.clearance) {
        return children;
    }
    let tau = cfg.limits.primitive_duration;
    let offsets = sample_times(0.0, tau, cfg.check_step()).unwrap_or_default();
    'controls: for u in controls(cfg.limits.a_max) {
        // kinematic checks first, they are cheap
        for &s in &offsets[1..] {
            let st = propagate_unchecked(&node.state, &u, s);
            if !cfg.velocity_bound.admits(&st.v, cfg.limits.v_max) || !cfg.in_workspace(&st.p) {
                continue 'controls;
            }
        }
        for &s in &offsets[1..] {
            let st = propagate_unchecked(&node.state, &u, s);
            if map.any_within(&st.p, cfg.clearance) {
                continue 'controls;
            }
        }
        let mut end = propagate_unchecked(&node.state, &u, tau);
        end.a = u;
        let g = node.g + edge_cost(&u, cfg);
        children.push(SearchNode {
            state: end,
            g,
            f: g + heuristic(&end, goal, cfg),
            parent,
            u,
        });
    }
    children
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    seq: u64,
    id: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap pops the max: invert so lower f, then lower h, then FIFO wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

type Cell = [i64; 3];

fn cell_of(p: &Vec3, size: f64) -> Cell {
    [
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    ]
}

/// Kinodynamic A* from `start` to `goal` against `map`.
pub fn plan<M: CollisionQuery + ?Sized>(
    start: &UavState,
    goal: &Vec3,
    cfg: &PlannerConfig,
    map: &M,
) -> Result<Plan, PlanError> {
    let clock = Instant::now();
    cfg.validate()
        .map_err(|e| PlanError::InvalidInput(e.to_string()))?;
    if !start.is_finite() || !goal.iter().all(|c| c.is_finite()) {
        return Err(PlanError::InvalidInput("non-finite start or goal".into()));
    }
    if let Some(hit) = map.nearest_within(&start.p, cfg.clearance) {
        return Err(PlanError::StartInCollision {
            distance: hit.distance,
        });
    }

    let cell_size = cfg.prune_cell();
    let mut report = SearchReport::default();
    let mut arena: Vec<SearchNode> = Vec::new();
    let mut open = BinaryHeap::new();
    let mut open_best: HashMap<Cell, f64> = HashMap::new();
    let mut closed: HashMap<Cell, f64> = HashMap::new();
    let mut seq = 0u64;

    let h0 = heuristic(start, goal, cfg);
    arena.push(SearchNode {
        state: *start,
        g: 0.0,
        f: h0,
        parent: None,
        u: Vec3::zeros(),
    });
    open.push(OpenEntry {
        f: h0,
        h: h0,
        seq,
        id: 0,
    });
    open_best.insert(cell_of(&start.p, cell_size), 0.0);
    let mut last_attempt = f64::INFINITY;

    let finish = |report: &mut SearchReport, open_len: usize, closed_len: usize| {
        report.open_size = open_len;
        report.closed_size = closed_len;
        report.wall_time_s = clock.elapsed().as_secs_f64();
    };

    while let Some(entry) = open.pop() {
        let node = arena[entry.id];
        let cell = cell_of(&node.state.p, cell_size);
        if closed.get(&cell).is_some_and(|&g| g <= node.g) {
            continue;
        }
        if open_best.get(&cell).is_some_and(|&g| g < node.g) {
            // superseded by a cheaper arrival in the same cell
            continue;
        }
        closed.insert(cell, node.g);

        let dist = (node.state.p - goal).norm();
        let attempt =
            node.parent.is_none() || dist <= last_attempt - cfg.analytic_trigger || dist <= NEAR_GOAL;
        if attempt {
            last_attempt = dist;
            report.analytic_attempts += 1;
            if let Some(seg) = analytic_expansion(&node.state, goal, cfg, map) {
                let chain = node_chain(&arena, entry.id);
                let mut segments = Vec::with_capacity(chain.len());
                for pair in chain.windows(2) {
                    let seg = ConstantAccelSegment::new(
                        pair[0].state,
                        pair[1].u,
                        cfg.limits.primitive_duration,
                    )
                    .map_err(|e| PlanError::InvalidInput(e.to_string()))?;
                    segments.push(Segment::ConstantAccel(seg));
                }
                segments.push(Segment::Polynomial(seg));
                let trajectory =
                    Trajectory::new(segments).map_err(|e| PlanError::InvalidInput(e.to_string()))?;
                report.analytic_success = true;
                report.cost = node.g + seg.effort() + cfg.time_weight * seg.duration;
                finish(&mut report, open.len(), closed.len());
                return Ok(Plan {
                    trajectory,
                    report,
                    nodes: chain,
                });
            }
        }

        if report.expansions >= cfg.max_expansions {
            finish(&mut report, open.len(), closed.len());
            return Err(PlanError::Exhausted { report });
        }
        report.expansions += 1;

        for child in expand(&node, Some(entry.id), goal, cfg, map) {
            let c = cell_of(&child.state.p, cell_size);
            if closed.get(&c).is_some_and(|&g| g <= child.g) {
                continue;
            }
            if open_best.get(&c).is_some_and(|&g| g <= child.g) {
                continue;
            }
            open_best.insert(c, child.g);
            report.nodes_generated += 1;
            seq += 1;
            let id = arena.len();
            arena.push(child);
            open.push(OpenEntry {
                f: child.f,
                h: child.f - child.g,
                seq,
                id,
            });
        }
    }
    finish(&mut report, 0, closed.len());
    Err(PlanError::NoPath { report })
}

fn node_chain(arena: &[SearchNode], leaf: usize) -> Vec<SearchNode> {
    let mut chain = vec![arena[leaf]];
    let mut cur = arena[leaf].parent;
    while let Some(i) = cur {
        chain.push(arena[i]);
        cur = arena[i].parent;
    }
    chain.reverse();
    chain
}
