//! Forward-looking solid-state lidar with an elliptical field of view.
//!
//! The default `rosette` pattern superposes two counter-rotating phasors with
//! an irrational frequency ratio per laser head, so ray directions keep
//! drifting from frame to frame and coverage densifies with accumulation time.

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::env::PosedEnvironment;
use crate::error::{CoreError, Result};
use crate::geometry::{PointCloud, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPattern {
    #[default]
    Rosette,
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub points_per_second: f64,
    pub frame_rate: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
    pub pattern: ScanPattern,
    pub heads: usize,
    /// Rotation rate of the fast phasor, Hz; the slow one turns at
    /// `rosette_hz · (√5 − 1) / 2` in the opposite sense.
    pub rosette_hz: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            fov_h_deg: 70.4,
            fov_v_deg: 77.2,
            points_per_second: 240_000.0,
            frame_rate: 50.0,
            max_range: 450.0,
            range_noise_sigma: 0.02,
            pattern: ScanPattern::Rosette,
            heads: 6,
            rosette_hz: 80.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::InvalidArgument(format!("sensor: {m}")));
        for (name, fov) in [("fov_h_deg", self.fov_h_deg), ("fov_v_deg", self.fov_v_deg)] {
            if !(fov > 0.0 && fov <= 180.0) {
                return bad(format!("{name} must be in (0, 180], got {fov}"));
            }
        }
        if !(self.points_per_second > 0.0 && self.frame_rate > 0.0 && self.max_range > 0.0) {
            return bad("rates and range must be positive".into());
        }
        if !(self.range_noise_sigma >= 0.0) {
            return bad("range_noise_sigma must be non-negative".into());
        }
        if self.heads == 0 || !(self.rosette_hz > 0.0) {
            return bad("rosette needs at least one head and a positive rate".into());
        }
        if self.points_per_frame() == 0 {
            return bad("fewer than one point per frame".into());
        }
        Ok(())
    }

    pub fn points_per_frame(&self) -> usize {
        (self.points_per_second / self.frame_rate).round() as usize
    }

    pub fn frame_period(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// Maps normalized FoV coordinates (unit disk) to a sensor-frame unit ray.
    fn direction(&self, x: f64, y: f64) -> Vec3 {
        let az = x * 0.5 * self.fov_h_deg.to_radians();
        let el = y * 0.5 * self.fov_v_deg.to_radians();
        Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }
}

/// Sensor pose looking along `yaw` (radians about +z), level.
pub fn level_pose(position: &Vec3, yaw: f64) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::from(*position),
        UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
    )
}

/// A lidar instance with its own random stream.
#[derive(Debug, Clone)]
pub struct Lidar {
    pub model: SensorModel,
    rng: ChaCha8Rng,
    phases: Vec<(f64, f64)>,
}

impl Lidar {
    pub fn new(model: SensorModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = (0..model.heads)
            .map(|_| {
                (
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Self { model, rng, phases }
    }

    /// Sensor-frame ray directions for the frame starting at `t`.
    pub fn directions(&mut self, t: f64) -> Vec<Vec3> {
        let n = self.model.points_per_frame();
        match self.model.pattern {
            ScanPattern::Rosette => {
                let w1 = std::f64::consts::TAU * self.model.rosette_hz;
                let w2 = w1 * (5f64.sqrt() - 1.0) / 2.0;
                let heads = self.model.heads;
                (0..n)
                    .map(|i| {
                        let te = t + i as f64 / self.model.points_per_second;
                        let (ph1, ph2) = self.phases[i % heads];
                        let a1 = w1 * te + ph1;
                        let a2 = -w2 * te + ph2;
                        let x = 0.5 * (a1.cos() + a2.cos());
                        let y = 0.5 * (a1.sin() + a2.sin());
                        self.model.direction(x, y)
                    })
                    .collect()
            }
            ScanPattern::UniformRandom => (0..n)
                .map(|_| {
                    // uniform over the disk, then stretched to the ellipse
                    let r = self.rng.random::<f64>().sqrt();
                    let th = self.rng.random_range(0.0..std::f64::consts::TAU);
                    self.model.direction(r * th.cos(), r * th.sin())
                })
                .collect(),
        }
    }

    /// One frame of world-frame returns. Misses are dropped; each hit is
    /// perturbed along its ray by noise truncated at 3σ.
    pub fn scan(&mut self, env: &PosedEnvironment, pose: &Isometry3<f64>, t: f64) -> PointCloud {
        let dirs = self.directions(t);
        let origin = pose.translation.vector;
        let sigma = self.model.range_noise_sigma;
        let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
        let mut points = Vec::with_capacity(dirs.len() / 2);
        for d in dirs {
            let dw = pose.rotation * d;
            if let Some(hit) = env.cast_ray(&origin, &dw, self.model.max_range) {
                let dr = match &noise {
                    Some(n) => n.sample(&mut self.rng).clamp(-3.0 * sigma, 3.0 * sigma),
                    None => 0.0,
                };
                let range = (hit.range + dr).max(0.0);
                points.push(origin + dw * range);
            }
        }
        PointCloud::new(points, t)
    }
}
