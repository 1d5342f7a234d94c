//! KD-tree, the dual time-accumulated local map, and clearance checks.

mod kdtree;
mod local_map;

pub use kdtree::KdTree;
pub use local_map::{MapConfig, MapSnapshot, MapUpdate, TemporalLocalMap};

use crate::error::Result;
use crate::geometry::Vec3;
use crate::trajectory::{sample_times, Trajectory};

/// A stored point found by a radius-bounded nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborHit {
    pub point: Vec3,
    pub distance: f64,
    /// Insertion index within its tree.
    pub index: usize,
    /// Which tree of the local map held the point (0 for a bare tree).
    pub tree: usize,
}

/// Anything the planner can collision-check against.
pub trait CollisionQuery {
    fn nearest_within(&self, q: &Vec3, r: f64) -> Option<NeighborHit>;

    fn any_within(&self, q: &Vec3, r: f64) -> bool {
        self.nearest_within(q, r).is_some()
    }
}

impl CollisionQuery for KdTree {
    fn nearest_within(&self, q: &Vec3, r: f64) -> Option<NeighborHit> {
        KdTree::nearest_within(self, q, r)
    }

    fn any_within(&self, q: &Vec3, r: f64) -> bool {
        KdTree::any_within(self, q, r)
    }
}

impl<T: CollisionQuery + ?Sized> CollisionQuery for &T {
    fn nearest_within(&self, q: &Vec3, r: f64) -> Option<NeighborHit> {
        (**self).nearest_within(q, r)
    }

    fn any_within(&self, q: &Vec3, r: f64) -> bool {
        (**self).any_within(q, r)
    }
}

/// First sampled collision on a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryCollision {
    pub t: f64,
    pub position: Vec3,
    pub hit: NeighborHit,
}

/// Samples `traj` every `dt` from `from` to its end (end included) and returns
/// the earliest sample within `clearance` of the map, or `None` when clear.
pub fn check_trajectory<M: CollisionQuery + ?Sized>(
    map: &M,
    traj: &Trajectory,
    from: f64,
    clearance: f64,
    dt: f64,
) -> Result<Option<TrajectoryCollision>> {
    let from = from.clamp(traj.t0(), traj.end_time());
    for t in sample_times(from, traj.end_time(), dt)? {
        let position = traj.state_at(t).p;
        if let Some(hit) = map.nearest_within(&position, clearance) {
            return Ok(Some(TrajectoryCollision { t, position, hit }));
        }
    }
    Ok(None)
}

/// Default collision-check step: no sample gap exceeds half the clearance at
/// top speed.
pub fn default_check_step(clearance: f64, v_max: f64) -> f64 {
    clearance / (2.0 * v_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::UavState;
    use crate::trajectory::{ConstantAccelSegment, Segment};

    fn straight(v: f64, tau: f64) -> Trajectory {
        let start = UavState {
            t: 0.0,
            p: Vec3::zeros(),
            v: Vec3::new(v, 0.0, 0.0),
            a: Vec3::zeros(),
        };
        Trajectory::new(vec![Segment::ConstantAccel(
            ConstantAccelSegment::new(start, Vec3::zeros(), tau).unwrap(),
        )])
        .unwrap()
    }

    #[test]
    fn empty_map_is_clear() {
        let tree = KdTree::build(Vec::new());
        assert!(check_trajectory(&tree, &straight(2.0, 3.0), 0.0, 0.45, 0.1)
            .unwrap()
            .is_none());
    }

    #[test]
    fn first_sample_inside_clearance() {
        // obstacle 0.2 m off a straight 6 m line along x at x = 3
        let obstacle = Vec3::new(3.0, 0.2, 0.0);
        let tree = KdTree::build(vec![obstacle]);
        let traj = straight(2.0, 3.0);
        let dt = default_check_step(0.45, 2.0);
        let hit = check_trajectory(&tree, &traj, 0.0, 0.45, dt).unwrap().unwrap();
        // analytic: the path is within 0.45 m for |x - 3| <= sqrt(0.45² - 0.2²)
        let half_chord = (0.45f64.powi(2) - 0.2f64.powi(2)).sqrt();
        let x_enter = 3.0 - half_chord;
        let k = ((x_enter / 2.0) / dt).ceil();
        assert!((hit.t - k * dt).abs() < 1e-9);
        let prev_x = (k - 1.0) * dt * 2.0;
        assert!(prev_x < x_enter && hit.position.x >= x_enter);
    }

    #[test]
    fn off_path_obstacle_beyond_clearance() {
        let tree = KdTree::build(vec![Vec3::new(3.0, 0.5, 0.0)]);
        assert!(check_trajectory(&tree, &straight(2.0, 3.0), 0.0, 0.45, 0.01)
            .unwrap()
            .is_none());
    }

    #[test]
    fn checks_only_from_tracking_time() {
        let tree = KdTree::build(vec![Vec3::new(1.0, 0.0, 0.0)]);
        let traj = straight(2.0, 3.0);
        assert!(check_trajectory(&tree, &traj, 0.0, 0.45, 0.1).unwrap().is_some());
        assert!(check_trajectory(&tree, &traj, 1.0, 0.45, 0.1).unwrap().is_none());
    }
}
