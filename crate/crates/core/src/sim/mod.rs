//! Synthetic lidar, analytic obstacles and the closed-loop flight simulator.

pub mod env;
pub mod runner;
pub mod scenario;
pub mod sensor;

pub use env::{Environment, Motion, Obstacle, PosedEnvironment, Shape};
pub use runner::{simulate, Event, FrameRow, Outcome, RunLog, StageTimings};
pub use scenario::{CompareConfig, Scenario, SimConfig};
pub use sensor::{level_pose, Lidar, ScanPattern, SensorModel};
