//! Closed-loop flight: scan, map update, replan check, track, audit.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::env::Environment;
use super::scenario::Scenario;
use super::sensor::{level_pose, Lidar};
use crate::error::Result;
use crate::geometry::{PointCloud, Vec3};
use crate::gridmap::{traverse, CellIndex};
use crate::planner::{PlanError, ReplanManager, ReplanOutcome, SearchReport};
use crate::spatial::{KdTree, TemporalLocalMap};
use crate::state::UavState;
use crate::trajectory::{ConstantAccelSegment, Segment, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    Collision,
    PlannerFailure,
    Timeout,
}

impl Outcome {
    /// Process exit status for this outcome. 1 and 2 are left for errors and
    /// usage mistakes.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::GoalReached => 0,
            Outcome::Collision => 3,
            Outcome::PlannerFailure => 4,
            Outcome::Timeout => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::GoalReached => "goal_reached",
            Outcome::Collision => "collision",
            Outcome::PlannerFailure => "planner_failure",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Initial,
    Replan,
    Retry,
}

/// Log records. Everything here is a pure function of scenario and seed;
/// wall-clock timings live in [`StageTimings`].
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Scan { frame: usize, t: f64, points: usize },
    MapUpdate { frame: usize, tree: usize, cleared: bool, wrapped: bool, sizes: Vec<usize> },
    CollisionAhead { frame: usize, t_hit: f64, position: Vec3, point: Vec3, distance: f64 },
    Plan { frame: usize, kind: PlanKind, report: SearchReport, duration: f64 },
    PlanFailed { frame: usize, kind: PlanKind, reason: String, expansions: usize },
    UnseenTraversal { frame: usize, samples: usize, unseen: usize },
    Hover { frame: usize, t: f64, position: Vec3 },
    Resume { frame: usize, t: f64 },
    End { frame: usize, t: f64, outcome: Outcome, detail: String },
}

fn v3(v: &Vec3) -> String {
    format!("{:.6} {:.6} {:.6}", v.x, v.y, v.z)
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Scan { frame, t, points } => write!(f, "{frame} scan t={t:.3} points={points}"),
            Event::MapUpdate { frame, tree, cleared, wrapped, sizes } => {
                let sizes: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
                write!(
                    f,
                    "{frame} map tree={tree} cleared={cleared} wrapped={wrapped} sizes={}",
                    sizes.join(",")
                )
            }
            Event::CollisionAhead { frame, t_hit, position, point, distance } => write!(
                f,
                "{frame} collision_ahead t_hit={t_hit:.3} at={} point={} distance={distance:.4}",
                v3(position),
                v3(point)
            ),
            Event::Plan { frame, kind, report, duration } => write!(
                f,
                "{frame} plan kind={} expansions={} generated={} open={} closed={} analytic={}/{} cost={:.6} duration={duration:.3}",
                kind_str(*kind),
                report.expansions,
                report.nodes_generated,
                report.open_size,
                report.closed_size,
                report.analytic_success,
                report.analytic_attempts,
                report.cost
            ),
            Event::PlanFailed { frame, kind, reason, expansions } => write!(
                f,
                "{frame} plan_failed kind={} expansions={expansions} reason={reason}",
                kind_str(*kind)
            ),
            Event::UnseenTraversal { frame, samples, unseen } => {
                write!(f, "{frame} unseen_traversal unseen={unseen} samples={samples}")
            }
            Event::Hover { frame, t, position } => write!(f, "{frame} hover t={t:.3} at={}", v3(position)),
            Event::Resume { frame, t } => write!(f, "{frame} resume t={t:.3}"),
            Event::End { frame, t, outcome, detail } => {
                write!(f, "{frame} end t={t:.3} outcome={} {detail}", outcome.as_str())
            }
        }
    }
}

fn kind_str(k: PlanKind) -> &'static str {
    match k {
        PlanKind::Initial => "initial",
        PlanKind::Replan => "replan",
        PlanKind::Retry => "retry",
    }
}

/// UAV state and ground-truth distances at the start of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub frame: usize,
    pub t: f64,
    pub state: UavState,
    /// Smallest signed distance to any obstacle.
    pub clearance: f64,
    pub nearest: Option<usize>,
    pub hovering: bool,
    pub scan_points: usize,
}

impl FrameRow {
    pub const CSV_HEADER: &'static str =
        "frame,t,px,py,pz,vx,vy,vz,ax,ay,az,clearance,nearest,hovering,scan_points";

    pub fn to_csv(&self) -> String {
        let s = &self.state;
        format!(
            "{},{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            self.frame,
            self.t,
            s.p.x,
            s.p.y,
            s.p.z,
            s.v.x,
            s.v.y,
            s.v.z,
            s.a.x,
            s.a.y,
            s.a.z,
            self.clearance,
            self.nearest.map_or(-1, |i| i as i64),
            self.hovering as u8,
            self.scan_points
        )
    }
}

/// Per-stage wall times in seconds, one sample per invocation.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StageTimings {
    /// Accumulate + voxel filter + tree rebuild.
    pub map_update: Vec<f64>,
    pub tree_build: Vec<f64>,
    pub plan: Vec<f64>,
    pub scan: Vec<f64>,
}

/// Local map contents when a plan was made.
#[derive(Debug, Clone)]
pub struct MapSnapshotRecord {
    pub frame: usize,
    pub t: f64,
    pub trees: Vec<Arc<KdTree>>,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub scenario: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub events: Vec<Event>,
    pub rows: Vec<FrameRow>,
    pub timings: StageTimings,
    pub snapshots: Vec<MapSnapshotRecord>,
    pub replan_count: usize,
    pub plan_count: usize,
    /// Smallest ground-truth clearance over non-hover frames.
    pub min_clearance: f64,
    /// Same, per obstacle (index order of the scenario).
    pub min_distance_per_obstacle: Vec<f64>,
    pub path_length: f64,
    pub flight_time: f64,
    /// Last tracked trajectory.
    pub trajectory: Option<Trajectory>,
}

impl RunLog {
    /// The deterministic event log as text.
    pub fn event_text(&self) -> String {
        let mut out = format!("# scenario {} seed {}\n", self.scenario, self.seed);
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from(FrameRow::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }
}

/// Coarse record of space swept by sensor rays.
struct SeenSpace {
    cell: f64,
    stride: usize,
    cells: HashSet<CellIndex>,
}

impl SeenSpace {
    fn add_scan(&mut self, origin: &Vec3, scan: &PointCloud) {
        for p in scan.points.iter().step_by(self.stride) {
            self.cells.extend(traverse(origin, p, self.cell, &Vec3::zeros()));
        }
    }

    fn cell_of(&self, p: &Vec3) -> CellIndex {
        let q = p / self.cell;
        [q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64]
    }

    /// (samples, unseen samples) along `traj` from `from`.
    fn audit(&self, traj: &Trajectory, from: f64, dt: f64) -> (usize, usize) {
        let Ok(states) = traj.sample_from(from, dt) else {
            return (0, 0);
        };
        let unseen = states
            .iter()
            .filter(|s| !self.cells.contains(&self.cell_of(&s.p)))
            .count();
        (states.len(), unseen)
    }
}

/// Decelerate at the acceleration limit, all axes stopping together, then hold.
pub fn brake_trajectory(s: &UavState, a_max: f64, hold: f64) -> Result<Trajectory> {
    let start = UavState { a: Vec3::zeros(), ..*s };
    let vmax = start.v.amax();
    let mut segments = Vec::new();
    let mut at = start;
    if vmax > 1e-9 {
        let tau = vmax / a_max;
        let seg = ConstantAccelSegment::new(start, -start.v / tau, tau)?;
        at = seg.end_state();
        at.v = Vec3::zeros();
        segments.push(Segment::ConstantAccel(seg));
    }
    segments.push(Segment::ConstantAccel(ConstantAccelSegment::new(
        UavState { a: Vec3::zeros(), ..at },
        Vec3::zeros(),
        hold,
    )?));
    Trajectory::new(segments)
}

enum Mode {
    Flying,
    Hovering { since: f64, last_try: usize },
}

/// Runs the scenario until goal, collision, planner failure or timeout.
pub fn simulate(scenario: &Scenario) -> Result<RunLog> {
    scenario.validate()?;
    let env: Environment = scenario.environment();
    let dt = scenario.sensor.frame_period();
    let goal = scenario.goal_position();
    let cfg = scenario.planner;
    let sim = scenario.sim;
    let manager = ReplanManager::new(cfg, goal, sim.plan_budget);
    let mut lidar = Lidar::new(scenario.sensor, scenario.seed);
    let mut map = TemporalLocalMap::new(scenario.map)?;
    let mut seen = SeenSpace {
        cell: sim.seen_cell,
        stride: sim.seen_ray_stride,
        cells: HashSet::new(),
    };

    let mut log = RunLog {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        outcome: Outcome::Timeout,
        events: Vec::new(),
        rows: Vec::new(),
        timings: StageTimings::default(),
        snapshots: Vec::new(),
        replan_count: 0,
        plan_count: 0,
        min_clearance: f64::INFINITY,
        min_distance_per_obstacle: vec![f64::INFINITY; env.obstacles.len()],
        path_length: 0.0,
        flight_time: 0.0,
        trajectory: None,
    };

    let mut state = UavState::at_rest(0.0, scenario.start_position());
    let mut yaw = scenario.start.yaw_deg.to_radians();
    let mut traj: Option<Trajectory> = None;
    let mut mode = Mode::Hovering { since: 0.0, last_try: 0 };
    let hover_hold = sim.hover_timeout + 10.0 * dt + 1.0;
    let max_frames = (scenario.duration / dt).floor() as usize;

    let mut frame = 0;
    let end = loop {
        let t = frame as f64 * dt;
        state.t = t;
        let posed = env.at(t);

        // ground-truth audit
        let hovering = matches!(mode, Mode::Hovering { .. }) && traj.is_some();
        let mut nearest = None;
        let mut clearance = f64::INFINITY;
        for (i, item) in posed.items.iter().enumerate() {
            let d = item.distance(&state.p);
            if !hovering {
                log.min_distance_per_obstacle[i] = log.min_distance_per_obstacle[i].min(d);
            }
            if d < clearance {
                clearance = d;
                nearest = Some(i);
            }
        }
        if !hovering {
            log.min_clearance = log.min_clearance.min(clearance);
        }
        let row_index = log.rows.len();
        log.rows.push(FrameRow {
            frame,
            t,
            state,
            clearance,
            nearest,
            hovering,
            scan_points: 0,
        });
        if clearance < sim.body_radius {
            let name = nearest.map_or("", |i| env.obstacles[i].name.as_str());
            break (Outcome::Collision, format!("obstacle={name} distance={clearance:.4}"));
        }
        if (state.p - goal).norm() <= cfg.goal_tolerance {
            break (Outcome::GoalReached, format!("at={}", v3(&state.p)));
        }
        if frame >= max_frames {
            break (Outcome::Timeout, String::new());
        }
        if let Mode::Hovering { since, .. } = mode {
            if traj.is_some() && t - since > sim.hover_timeout {
                break (Outcome::PlannerFailure, format!("hovered {:.3} s", t - since));
            }
        }

        // sense and map
        let horizontal = Vec3::new(state.v.x, state.v.y, 0.0);
        if horizontal.norm() > 0.1 {
            yaw = horizontal.y.atan2(horizontal.x);
        }
        let pose = level_pose(&state.p, yaw);
        let t0 = Instant::now();
        let scan = lidar.scan(&posed, &pose, t);
        log.timings.scan.push(t0.elapsed().as_secs_f64());
        log.rows[row_index].scan_points = scan.len();
        log.events.push(Event::Scan { frame, t, points: scan.len() });
        seen.add_scan(&state.p, &scan);
        let update = map.update(&scan)?;
        log.timings.map_update.push(update.total_time.as_secs_f64());
        log.timings.tree_build.push(update.build_time.as_secs_f64());
        log.events.push(Event::MapUpdate {
            frame,
            tree: update.tree,
            cleared: update.cleared,
            wrapped: update.wrapped,
            sizes: map.tree_sizes(),
        });

        // plan
        let snapshot = map.snapshot();
        let mut new_plan: Option<(Trajectory, SearchReport, PlanKind)> = None;
        let mut failure: Option<(PlanError, PlanKind)> = None;
        match (&mode, &traj) {
            (Mode::Hovering { last_try, .. }, current) => {
                let due = current.is_none() || frame - last_try >= sim.retry_every;
                if due {
                    let kind = if current.is_none() { PlanKind::Initial } else { PlanKind::Retry };
                    let result = match current {
                        None => manager.initial(&state, &snapshot),
                        Some(c) => manager.replace(c, t, &snapshot),
                    };
                    match result {
                        Ok((tr, rep)) => new_plan = Some((tr, rep, kind)),
                        Err(e) => failure = Some((e, kind)),
                    }
                    if let Mode::Hovering { since, .. } = mode {
                        mode = Mode::Hovering { since, last_try: frame };
                    }
                }
            }
            (Mode::Flying, Some(current)) => match manager.step(current, t, &snapshot) {
                ReplanOutcome::Keep => {}
                ReplanOutcome::Replaced { trajectory, report, collision } => {
                    log.events.push(collision_event(frame, &collision));
                    new_plan = Some((trajectory, report, PlanKind::Replan));
                }
                ReplanOutcome::Failure { error, collision } => {
                    log.events.push(collision_event(frame, &collision));
                    failure = Some((error, PlanKind::Replan));
                }
            },
            (Mode::Flying, None) => unreachable!("flying without a trajectory"),
        }

        if let Some((tr, report, kind)) = new_plan {
            log.timings.plan.push(report.wall_time_s);
            log.plan_count += 1;
            if kind == PlanKind::Replan {
                log.replan_count += 1;
            }
            log.events.push(Event::Plan {
                frame,
                kind,
                report: report.clone(),
                duration: tr.duration(),
            });
            let (samples, unseen) = seen.audit(&tr, t, cfg.check_step());
            if unseen > 0 {
                log.events.push(Event::UnseenTraversal { frame, samples, unseen });
            }
            log.snapshots.push(MapSnapshotRecord {
                frame,
                t,
                trees: snapshot.trees().to_vec(),
            });
            if matches!(mode, Mode::Hovering { .. }) && traj.is_some() {
                log.events.push(Event::Resume { frame, t });
            }
            mode = Mode::Flying;
            traj = Some(tr);
        } else if let Some((error, kind)) = failure {
            if let Some(r) = error.report() {
                log.timings.plan.push(r.wall_time_s);
            }
            log.events.push(Event::PlanFailed {
                frame,
                kind,
                reason: failure_reason(&error),
                expansions: error.report().map_or(0, |r| r.expansions),
            });
            if matches!(mode, Mode::Flying) || traj.is_none() {
                let current = traj.as_ref().map_or(state, |c| c.state_at(t));
                traj = Some(brake_trajectory(&current, cfg.limits.a_max, hover_hold)?);
                mode = Mode::Hovering { since: t, last_try: frame };
                log.events.push(Event::Hover { frame, t, position: state.p });
            }
        }

        // track
        let t_next = t + dt;
        let prev = state.p;
        if let Some(tr) = &traj {
            let reference = tr.state_at(t_next);
            state = if sim.tracking_lag > 0.0 {
                let k = 1.0 - (-dt / sim.tracking_lag).exp();
                let p = state.p + (reference.p - state.p) * k;
                let v = (p - state.p) / dt;
                UavState { t: t_next, p, v, a: (v - state.v) / dt }
            } else {
                UavState { t: t_next, ..reference }
            };
        }
        log.path_length += (state.p - prev).norm();
        frame += 1;
    };

    let t_end = frame as f64 * dt;
    log.outcome = end.0;
    log.flight_time = t_end;
    log.events.push(Event::End {
        frame,
        t: t_end,
        outcome: end.0,
        detail: end.1,
    });
    log.trajectory = traj;
    Ok(log)
}

fn collision_event(frame: usize, c: &crate::spatial::TrajectoryCollision) -> Event {
    Event::CollisionAhead {
        frame,
        t_hit: c.t,
        position: c.position,
        point: c.hit.point,
        distance: c.hit.distance,
    }
}

fn failure_reason(e: &PlanError) -> String {
    match e {
        PlanError::StartInCollision { distance } => format!("start_in_collision({distance:.4})"),
        PlanError::Exhausted { .. } => "exhausted".into(),
        PlanError::NoPath { .. } => "no_path".into(),
        PlanError::InvalidInput(m) => format!("invalid_input({m})"),
    }
}
