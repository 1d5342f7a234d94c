//! Kinodynamic A* over constant-acceleration motion primitives, closed by a
//! quintic analytic expansion, and the collision-triggered replan manager.

mod analytic;
mod astar;
mod replan;

pub use analytic::{analytic_expansion, axis_extrema};
pub use astar::{edge_cost, expand, heuristic, plan, Plan, SearchNode};
pub use replan::{ReplanManager, ReplanOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{CoreError, Result};
use crate::geometry::Vec3;
use crate::spatial::default_check_step;
use crate::state::KinodynamicLimits;

/// How the speed limit is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityBound {
    /// `|v_i| <= v_max` on every axis.
    #[default]
    PerAxis,
    /// `‖v‖ <= v_max`.
    Norm,
}

impl VelocityBound {
    pub fn admits(self, v: &Vec3, v_max: f64) -> bool {
        const EPS: f64 = 1e-9;
        match self {
            VelocityBound::PerAxis => v.amax() <= v_max + EPS,
            VelocityBound::Norm => v.norm() <= v_max + EPS,
        }
    }
}

/// Axis-aligned box the planner must stay inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Workspace {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub limits: KinodynamicLimits,
    /// Minimum distance to any map point, meters.
    pub clearance: f64,
    pub goal_tolerance: f64,
    /// Position-only dedup grid; `None` means half the clearance.
    pub prune_cell: Option<f64>,
    /// Cost per second of flight (`rho`).
    pub time_weight: f64,
    pub max_expansions: usize,
    pub velocity_bound: VelocityBound,
    /// Collision-check sampling step; `None` means `clearance / (2 v_max)`.
    pub check_step: Option<f64>,
    /// Heuristic-distance decrease that triggers another analytic expansion.
    pub analytic_trigger: f64,
    pub workspace: Option<Workspace>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            limits: KinodynamicLimits::default(),
            clearance: 0.45,
            goal_tolerance: 0.3,
            prune_cell: None,
            time_weight: 1.0,
            max_expansions: 3000,
            velocity_bound: VelocityBound::PerAxis,
            check_step: None,
            analytic_trigger: 1.0,
            workspace: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        let positive = [
            ("clearance", self.clearance),
            ("goal_tolerance", self.goal_tolerance),
            ("time_weight", self.time_weight),
            ("analytic_trigger", self.analytic_trigger),
            ("prune_cell", self.prune_cell()),
            ("check_step", self.check_step()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::InvalidArgument(format!(
                    "planner: {name} must be positive, got {v}"
                )));
            }
        }
        if self.max_expansions == 0 {
            return Err(CoreError::InvalidArgument(
                "planner: max_expansions must be positive".into(),
            ));
        }
        if let Some(ws) = &self.workspace {
            if (0..3).any(|i| !(ws.min[i] < ws.max[i])) {
                return Err(CoreError::InvalidArgument("planner: empty workspace".into()));
            }
        }
        Ok(())
    }

    pub fn prune_cell(&self) -> f64 {
        self.prune_cell.unwrap_or(0.5 * self.clearance)
    }

    pub fn check_step(&self) -> f64 {
        self.check_step
            .unwrap_or_else(|| default_check_step(self.clearance, self.limits.v_max))
    }

    fn in_workspace(&self, p: &Vec3) -> bool {
        self.workspace.as_ref().is_none_or(|ws| ws.contains(p))
    }
}

/// Per-invocation search statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchReport {
    pub expansions: usize,
    pub nodes_generated: usize,
    pub open_size: usize,
    pub closed_size: usize,
    pub analytic_attempts: usize,
    /// The returned path ends with an accepted analytic expansion.
    pub analytic_success: bool,
    /// Total cost of the returned path (0 on failure).
    pub cost: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Error)]
pub enum PlanError {
    #[error("start state is within clearance of an obstacle (nearest {distance:.3} m)")]
    StartInCollision { distance: f64 },
    #[error("search exhausted its expansion budget after {} expansions", report.expansions)]
    Exhausted { report: SearchReport },
    #[error("open set emptied without reaching the goal after {} expansions", report.expansions)]
    NoPath { report: SearchReport },
    #[error("invalid planner input: {0}")]
    InvalidInput(String),
}

impl PlanError {
    pub fn report(&self) -> Option<&SearchReport> {
        match self {
            PlanError::Exhausted { report } | PlanError::NoPath { report } => Some(report),
            _ => None,
        }
    }
}
