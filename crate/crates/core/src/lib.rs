//! Obstacle avoidance that plans directly on lidar point clouds.
//!
//! The pipeline is the one a small lidar quadrotor runs at 50 Hz:
//!
//! 1. a world-frame scan is folded into a [`TemporalLocalMap`] made of two
//!    time-accumulated KD-trees,
//! 2. the trajectory currently being tracked is collision-checked against
//!    that map,
//! 3. on collision, a kinodynamic A* search over constant-acceleration motion
//!    primitives produces a replacement trajectory.
//!
//! [`sim`] closes the loop with a synthetic forward-looking lidar over analytic
//! obstacles, and [`gridmap`] holds a small ray-casting occupancy grid used to
//! show how thin objects get lost in probabilistic occupancy maps.

pub mod error;
pub mod geometry;
pub mod gridmap;
pub mod planner;
pub mod sim;
pub mod spatial;
pub mod state;
pub mod trajectory;
pub mod voxel;

pub use error::{CoreError, Result};
pub use geometry::{PointCloud, Vec3};
pub use planner::{
    plan, PlanError, PlannerConfig, ReplanManager, ReplanOutcome, SearchReport, VelocityBound,
};
pub use spatial::{CollisionQuery, KdTree, MapConfig, NeighborHit, TemporalLocalMap};
pub use state::{propagate, KinodynamicLimits, UavState};
pub use trajectory::{ConstantAccelSegment, PolynomialSegment, Segment, Trajectory};
pub use voxel::voxel_filter;
