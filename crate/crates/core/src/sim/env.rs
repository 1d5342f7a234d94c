//! Analytic obstacles: exact ray intersection and signed distance.

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{point_segment_distance, Vec3};

/// Rays starting this close to a surface do not report it.
const RAY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere { center: [f64; 3], radius: f64 },
    /// A segment swept by a sphere; models bars, branches and trunks.
    Capsule { p0: [f64; 3], p1: [f64; 3], radius: f64 },
    /// Axis-aligned in the obstacle's own frame.
    Box { min: [f64; 3], max: [f64; 3] },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Sphere { radius, .. } | Shape::Capsule { radius, .. } => *radius > 0.0,
            Shape::Box { min, max } => (0..3).all(|i| min[i] < max[i]),
        };
        if ok {
            Ok(())
        } else {
            Err(CoreError::InvalidArgument(format!("degenerate shape {self:?}")))
        }
    }

    /// Distance along the unit ray `o + t·d` to the first surface, `t > 0`.
    pub fn ray_hit(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        match *self {
            Shape::Sphere { center, radius } => ray_sphere(o, d, &Vec3::from(center), radius),
            Shape::Capsule { p0, p1, radius } => {
                ray_capsule(o, d, &Vec3::from(p0), &Vec3::from(p1), radius)
            }
            Shape::Box { min, max } => ray_box(o, d, &Vec3::from(min), &Vec3::from(max)),
        }
    }

    /// Signed distance, negative inside.
    pub fn distance(&self, p: &Vec3) -> f64 {
        match *self {
            Shape::Sphere { center, radius } => (p - Vec3::from(center)).norm() - radius,
            Shape::Capsule { p0, p1, radius } => {
                point_segment_distance(p, &Vec3::from(p0), &Vec3::from(p1)) - radius
            }
            Shape::Box { min, max } => {
                let (min, max) = (Vec3::from(min), Vec3::from(max));
                let center = (min + max) * 0.5;
                let half = (max - min) * 0.5;
                let q = (p - center).abs() - half;
                let outside = q.sup(&Vec3::zeros()).norm();
                outside + q.max().min(0.0)
            }
        }
    }

    /// Loose bounding radius around `anchor()`.
    fn bounding_sphere(&self) -> (Vec3, f64) {
        match *self {
            Shape::Sphere { center, radius } => (Vec3::from(center), radius),
            Shape::Capsule { p0, p1, radius } => {
                let (a, b) = (Vec3::from(p0), Vec3::from(p1));
                ((a + b) * 0.5, (b - a).norm() * 0.5 + radius)
            }
            Shape::Box { min, max } => {
                let (a, b) = (Vec3::from(min), Vec3::from(max));
                ((a + b) * 0.5, (b - a).norm() * 0.5)
            }
        }
    }
}

fn smallest_positive(candidates: impl IntoIterator<Item = f64>) -> Option<f64> {
    candidates
        .into_iter()
        .filter(|t| t.is_finite() && *t > RAY_EPS)
        .min_by(f64::total_cmp)
}

fn sphere_roots(o: &Vec3, d: &Vec3, c: &Vec3, r: f64) -> Option<(f64, f64)> {
    let oc = o - c;
    let b = oc.dot(d);
    let disc = b * b - (oc.norm_squared() - r * r);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some((-b - sq, -b + sq))
}

fn ray_sphere(o: &Vec3, d: &Vec3, c: &Vec3, r: f64) -> Option<f64> {
    let (t0, t1) = sphere_roots(o, d, c, r)?;
    smallest_positive([t0, t1])
}

fn ray_capsule(o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3, r: f64) -> Option<f64> {
    let mut cands: Vec<f64> = Vec::with_capacity(6);
    let ba = b - a;
    let baba = ba.norm_squared();
    if baba > 0.0 {
        // infinite cylinder around the axis, restricted to the segment's span
        let oa = o - a;
        let bard = ba.dot(d);
        let baoa = ba.dot(&oa);
        let qa = baba - bard * bard;
        let qb = baba * d.dot(&oa) - baoa * bard;
        let qc = baba * oa.norm_squared() - baoa * baoa - r * r * baba;
        if qa > 1e-12 * baba {
            let h = qb * qb - qa * qc;
            if h >= 0.0 {
                let sq = h.sqrt();
                for t in [(-qb - sq) / qa, (-qb + sq) / qa] {
                    let y = baoa + t * bard;
                    if y > 0.0 && y < baba {
                        cands.push(t);
                    }
                }
            }
        }
    }
    for c in [a, b] {
        if let Some((t0, t1)) = sphere_roots(o, d, c, r) {
            cands.push(t0);
            cands.push(t1);
        }
    }
    smallest_positive(cands)
}

fn ray_box(o: &Vec3, d: &Vec3, min: &Vec3, max: &Vec3) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-300 {
            if o[i] < min[i] || o[i] > max[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let (mut t0, mut t1) = ((min[i] - o[i]) * inv, (max[i] - o[i]) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    smallest_positive([t_near, t_far])
}

/// Rigid-motion schedule, evaluated at absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    /// Translates by `offset · s`, `s` ramping 0→1 over `[t_start, t_end]`.
    Linear {
        offset: [f64; 3],
        t_start: f64,
        t_end: f64,
    },
    /// Rotates by `angle_deg · s` about `axis` through `pivot`.
    Swing {
        pivot: [f64; 3],
        axis: [f64; 3],
        angle_deg: f64,
        t_start: f64,
        t_end: f64,
    },
    /// Sinusoidal rotation about `axis` through `pivot`.
    Oscillate {
        pivot: [f64; 3],
        axis: [f64; 3],
        amplitude_deg: f64,
        period: f64,
    },
}

impl Motion {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::InvalidArgument(format!("motion: {m}")));
        match *self {
            Motion::Linear { t_start, t_end, .. } | Motion::Swing { t_start, t_end, .. }
                if !(t_end > t_start) =>
            {
                bad("t_end must be after t_start")
            }
            Motion::Swing { axis, .. } | Motion::Oscillate { axis, .. }
                if Vec3::from(axis).norm() == 0.0 =>
            {
                bad("rotation axis must be non-zero")
            }
            Motion::Oscillate { period, .. } if !(period > 0.0) => bad("period must be positive"),
            _ => Ok(()),
        }
    }

    pub fn pose_at(&self, t: f64) -> Isometry3<f64> {
        let ramp = |t0: f64, t1: f64| ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        match *self {
            Motion::Linear {
                offset,
                t_start,
                t_end,
            } => Isometry3::from_parts(
                Translation3::from(Vec3::from(offset) * ramp(t_start, t_end)),
                UnitQuaternion::identity(),
            ),
            Motion::Swing {
                pivot,
                axis,
                angle_deg,
                t_start,
                t_end,
            } => rotation_about(pivot, axis, angle_deg.to_radians() * ramp(t_start, t_end)),
            Motion::Oscillate {
                pivot,
                axis,
                amplitude_deg,
                period,
            } => rotation_about(
                pivot,
                axis,
                amplitude_deg.to_radians() * (std::f64::consts::TAU * t / period).sin(),
            ),
        }
    }
}

fn rotation_about(pivot: [f64; 3], axis: [f64; 3], angle: f64) -> Isometry3<f64> {
    let pivot = Vec3::from(pivot);
    let rot = UnitQuaternion::from_axis_angle(&Unit::new_normalize(Vec3::from(axis)), angle);
    // x ↦ pivot + R (x - pivot)
    Isometry3::from_parts(Translation3::from(pivot - rot * pivot), rot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    #[serde(default)]
    pub name: String,
    pub shape: Shape,
    #[serde(default)]
    pub motion: Option<Motion>,
}

impl Obstacle {
    pub fn fixed(name: &str, shape: Shape) -> Self {
        Self {
            name: name.to_string(),
            shape,
            motion: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub obstacles: Vec<Obstacle>,
}

impl Environment {
    pub fn new(obstacles: Vec<Obstacle>) -> Self {
        Self { obstacles }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, o) in self.obstacles.iter().enumerate() {
            o.shape
                .validate()
                .and_then(|_| o.motion.as_ref().map_or(Ok(()), Motion::validate))
                .map_err(|e| CoreError::InvalidArgument(format!("obstacle {i} ({}): {e}", o.name)))?;
        }
        Ok(())
    }

    /// Obstacles frozen at their time-`t` poses.
    pub fn at(&self, t: f64) -> PosedEnvironment {
        PosedEnvironment {
            t,
            items: self
                .obstacles
                .iter()
                .map(|o| {
                    let pose = o.motion.as_ref().map(|m| m.pose_at(t));
                    let (c, r) = o.shape.bounding_sphere();
                    let center = pose.map_or(c, |p| p.transform_point(&c.into()).coords);
                    PosedObstacle {
                        shape: o.shape,
                        pose,
                        bound_center: center,
                        bound_radius: r,
                    }
                })
                .collect(),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.obstacles.iter().position(|o| o.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct PosedObstacle {
    pub shape: Shape,
    /// Local-to-world; `None` when static.
    pub pose: Option<Isometry3<f64>>,
    bound_center: Vec3,
    bound_radius: f64,
}

impl PosedObstacle {
    pub fn ray_hit(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        // cheap reject against the bounding sphere
        let oc = self.bound_center - o;
        let along = oc.dot(d);
        let perp2 = oc.norm_squared() - along * along;
        if perp2 > self.bound_radius * self.bound_radius
            || (along < 0.0 && oc.norm_squared() > self.bound_radius * self.bound_radius)
        {
            return None;
        }
        match &self.pose {
            None => self.shape.ray_hit(o, d),
            Some(pose) => {
                let lo = pose.inverse_transform_point(&(*o).into()).coords;
                let ld = pose.inverse_transform_vector(d);
                self.shape.ray_hit(&lo, &ld)
            }
        }
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        match &self.pose {
            None => self.shape.distance(p),
            Some(pose) => self
                .shape
                .distance(&pose.inverse_transform_point(&(*p).into()).coords),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PosedEnvironment {
    pub t: f64,
    pub items: Vec<PosedObstacle>,
}

/// A ray return: distance along the ray and which obstacle it hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub range: f64,
    pub obstacle: usize,
}

impl PosedEnvironment {
    /// Nearest intersection within `max_range` of the unit ray from `origin`.
    pub fn cast_ray(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        for (i, item) in self.items.iter().enumerate() {
            if let Some(t) = item.ray_hit(origin, dir) {
                if t <= max_range && best.is_none_or(|b| t < b.range) {
                    best = Some(RayHit { range: t, obstacle: i });
                }
            }
        }
        best
    }

    /// Smallest signed distance from `p` to any obstacle, with its index.
    pub fn min_distance(&self, p: &Vec3) -> Option<(f64, usize)> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, o)| (o.distance(p), i))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

/// Hit point of `cast_ray` in world coordinates.
pub fn cast_ray(
    env: &PosedEnvironment,
    origin: &Vec3,
    dir: &Vec3,
    max_range: f64,
) -> Option<Vec3> {
    env.cast_ray(origin, dir, max_range)
        .map(|h| origin + dir * h.range)
}
