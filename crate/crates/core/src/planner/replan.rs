//! Event-driven replanning: the tracked trajectory is re-checked after every
//! map update and replaced only when it collides.

use super::{plan, PlanError, PlannerConfig, SearchReport};
use crate::geometry::Vec3;
use crate::spatial::{check_trajectory, CollisionQuery, TrajectoryCollision};
use crate::state::UavState;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone)]
pub enum ReplanOutcome {
    Keep,
    Replaced {
        trajectory: Trajectory,
        report: SearchReport,
        collision: TrajectoryCollision,
    },
    Failure {
        error: PlanError,
        collision: TrajectoryCollision,
    },
}

#[derive(Debug, Clone)]
pub struct ReplanManager {
    pub config: PlannerConfig,
    pub goal: Vec3,
    /// Planning latency the handover point is shifted by, seconds.
    pub plan_budget: f64,
}

impl ReplanManager {
    pub fn new(config: PlannerConfig, goal: Vec3, plan_budget: f64) -> Self {
        Self {
            config,
            goal,
            plan_budget,
        }
    }

    /// Plans from scratch (no trajectory to follow yet).
    pub fn initial<M: CollisionQuery + ?Sized>(
        &self,
        start: &UavState,
        map: &M,
    ) -> Result<(Trajectory, SearchReport), PlanError> {
        plan(start, &self.goal, &self.config, map).map(|p| (p.trajectory, p.report))
    }

    /// One manager step after a map update.
    pub fn step<M: CollisionQuery + ?Sized>(
        &self,
        current: &Trajectory,
        tracking_time: f64,
        map: &M,
    ) -> ReplanOutcome {
        let collision = match check_trajectory(
            map,
            current,
            tracking_time,
            self.config.clearance,
            self.config.check_step(),
        ) {
            Ok(None) => return ReplanOutcome::Keep,
            Ok(Some(c)) => c,
            Err(e) => {
                return ReplanOutcome::Failure {
                    error: PlanError::InvalidInput(e.to_string()),
                    collision: TrajectoryCollision {
                        t: tracking_time,
                        position: current.state_at(tracking_time).p,
                        hit: crate::spatial::NeighborHit {
                            point: Vec3::zeros(),
                            distance: 0.0,
                            index: 0,
                            tree: 0,
                        },
                    },
                }
            }
        };
        match self.replace(current, tracking_time, map) {
            Ok((trajectory, report)) => ReplanOutcome::Replaced {
                trajectory,
                report,
                collision,
            },
            Err(error) => ReplanOutcome::Failure { error, collision },
        }
    }

    /// New trajectory that follows `current` until the handover time and the
    /// fresh plan afterwards.
    pub fn replace<M: CollisionQuery + ?Sized>(
        &self,
        current: &Trajectory,
        tracking_time: f64,
        map: &M,
    ) -> Result<(Trajectory, SearchReport), PlanError> {
        let t_now = tracking_time.clamp(current.t0(), current.end_time());
        let handover = (t_now + self.plan_budget).min(current.end_time());
        let start = current.state_at(handover);
        let plan = plan(&start, &self.goal, &self.config, map)?;
        let trajectory = if handover > t_now {
            current
                .window(t_now, handover)
                .and_then(|prefix| prefix.concat(&plan.trajectory))
                .map_err(|e| PlanError::InvalidInput(e.to_string()))?
        } else {
            plan.trajectory
        };
        Ok((trajectory, plan.report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::KdTree;

    fn manager() -> ReplanManager {
        ReplanManager::new(PlannerConfig::default(), Vec3::new(8.0, 0.0, 0.0), 0.03)
    }

    #[test]
    fn clear_trajectory_is_kept() {
        let m = manager();
        let empty = KdTree::default();
        let (traj, _) = m.initial(&UavState::at_rest(0.0, Vec3::zeros()), &empty).unwrap();
        assert!(matches!(m.step(&traj, 0.5, &empty), ReplanOutcome::Keep));
    }

    #[test]
    fn blocked_trajectory_is_replaced_continuously() {
        let m = manager();
        let (traj, _) = m
            .initial(&UavState::at_rest(0.0, Vec3::zeros()), &KdTree::default())
            .unwrap();
        // a bar across the path at x = 5
        let bar: Vec<Vec3> = (-20..=20).map(|i| Vec3::new(5.0, 0.0, i as f64 * 0.05)).collect();
        let map = KdTree::build(bar);
        let t_now = 1.0;
        match m.step(&traj, t_now, &map) {
            ReplanOutcome::Replaced { trajectory, .. } => {
                assert!((trajectory.t0() - t_now).abs() < 1e-12);
                // identical to the old plan over the handover window
                for k in 0..=3 {
                    let t = t_now + 0.01 * k as f64;
                    assert!((trajectory.state_at(t).p - traj.state_at(t).p).norm() < 1e-9);
                }
                assert!(check_trajectory(&map, &trajectory, t_now, 0.45, 0.05).unwrap().is_none());
                assert!((trajectory.end_state().p - m.goal).norm() <= 0.3);
            }
            other => panic!("expected replacement, got {other:?}"),
        }
    }
}
