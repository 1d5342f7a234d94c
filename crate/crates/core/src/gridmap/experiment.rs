//! Thin bar in front of a backdrop, seen by a static sensor: how much of the
//! bar survives in the occupancy grid versus the point-cloud map.

use std::collections::HashSet;
use std::time::Instant;

use nalgebra::Isometry3;
use serde::Serialize;

use super::{CellIndex, LogOddsParams, OccupancyGrid};
use crate::error::{CoreError, Result};
use crate::geometry::Vec3;
use crate::sim::env::{Environment, Shape};
use crate::sim::sensor::{Lidar, SensorModel};
use crate::spatial::{MapConfig, TemporalLocalMap};

#[derive(Debug, Clone)]
pub struct ThinObjectSetup {
    pub env: Environment,
    /// Index of the capsule playing the bar.
    pub bar: usize,
    pub sensor: SensorModel,
    pub sensor_pose: Isometry3<f64>,
    pub frames: usize,
    pub seed: u64,
    pub grid_resolution: f64,
    pub grid_params: LogOddsParams,
    pub map: MapConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThinObjectReport {
    pub grid_resolution: f64,
    pub frames: usize,
    /// Grid cells overlapping the bar.
    pub bar_cells: usize,
    pub occupied_bar_cells: usize,
    pub bar_cell_occupied_fraction: f64,
    /// Points of the local map lying on the bar surface.
    pub pointcloud_bar_points: usize,
    pub pointcloud_points: usize,
    /// Raw returns on the bar summed over all frames.
    pub raw_bar_returns: usize,
    pub grid_cells_traversed: usize,
    pub grid_integrate_s: f64,
    pub map_update_s: f64,
    #[serde(skip)]
    pub grid: OccupancyGrid,
}

fn bar_axis(setup: &ThinObjectSetup, t: f64) -> Result<(Vec3, Vec3, f64)> {
    let obstacle = setup
        .env
        .obstacles
        .get(setup.bar)
        .ok_or_else(|| CoreError::InvalidArgument(format!("no obstacle {}", setup.bar)))?;
    let Shape::Capsule { p0, p1, radius } = obstacle.shape else {
        return Err(CoreError::InvalidArgument("the bar must be a capsule".into()));
    };
    let pose = obstacle.motion.map(|m| m.pose_at(t)).unwrap_or_else(Isometry3::identity);
    let a = pose.transform_point(&Vec3::from(p0).into()).coords;
    let b = pose.transform_point(&Vec3::from(p1).into()).coords;
    Ok((a, b, radius))
}

fn point_box_distance(p: &Vec3, lo: &Vec3, hi: &Vec3) -> f64 {
    let q = p.sup(lo).inf(hi);
    (p - q).norm()
}

/// Grid cells whose box comes within `radius` of the segment `a → b`.
fn cells_overlapping(grid: &OccupancyGrid, a: &Vec3, b: &Vec3, radius: f64) -> Vec<CellIndex> {
    let lo = grid.cell_of(&(a.inf(b) - Vec3::repeat(radius)));
    let hi = grid.cell_of(&(a.sup(b) + Vec3::repeat(radius)));
    let step = (radius.min(grid.resolution()) * 0.25).max(1e-4);
    let n = ((b - a).norm() / step).ceil().max(1.0) as usize;
    let samples: Vec<Vec3> = (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect();
    let mut out = Vec::new();
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let c = [i, j, k];
                let (blo, bhi) = grid.cell_bounds(&c);
                if samples.iter().any(|s| point_box_distance(s, &blo, &bhi) <= radius) {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Runs `frames` scans from a fixed pose into both representations.
pub fn thin_object_experiment(setup: &ThinObjectSetup) -> Result<ThinObjectReport> {
    setup.env.validate()?;
    setup.sensor.validate()?;
    if setup.frames == 0 {
        return Err(CoreError::InvalidArgument("thin-object experiment needs frames >= 1".into()));
    }
    bar_axis(setup, 0.0)?;
    let mut grid = OccupancyGrid::new(setup.grid_resolution, Vec3::zeros(), setup.grid_params)?;
    let mut map = TemporalLocalMap::new(setup.map)?;
    let mut lidar = Lidar::new(setup.sensor, setup.seed);
    let origin = setup.sensor_pose.translation.vector;
    let period = setup.sensor.frame_period();

    let (mut traversed, mut grid_s, mut map_s, mut raw_bar) = (0, 0.0, 0.0, 0);
    let sigma = setup.sensor.range_noise_sigma;
    let mut t = 0.0;
    for k in 0..setup.frames {
        t = k as f64 * period;
        let posed = setup.env.at(t);
        let scan = lidar.scan(&posed, &setup.sensor_pose, t);
        raw_bar += scan
            .points
            .iter()
            .filter(|p| posed.items[setup.bar].distance(p).abs() <= 3.0 * sigma + 1e-9)
            .count();
        let t0 = Instant::now();
        traversed += grid.integrate_scan(&origin, &scan).cells_traversed;
        grid_s += t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        map.update(&scan)?;
        map_s += t0.elapsed().as_secs_f64();
    }

    let (a, b, radius) = bar_axis(setup, t)?;
    let cells = cells_overlapping(&grid, &a, &b, radius);
    let occupied = cells.iter().filter(|c| grid.is_occupied(c)).count();

    // a map point is on the bar if it is within the noise band plus half a
    // voxel diagonal of the surface and nearer the bar than anything else
    let posed = setup.env.at(t);
    let tol = 3.0 * sigma + setup.map.resolution * 3f64.sqrt() / 2.0;
    let mut bar_points = 0;
    let mut total = 0;
    let mut seen = HashSet::new();
    for tree in map.trees() {
        for p in tree.points() {
            // voxel centroids are unique per tree; skip exact repeats across trees
            if !seen.insert([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]) {
                continue;
            }
            total += 1;
            let d_bar = posed.items[setup.bar].distance(p);
            let nearest = posed.min_distance(p).map(|(d, _)| d).unwrap_or(f64::INFINITY);
            if d_bar.abs() <= tol && d_bar <= nearest + 1e-12 {
                bar_points += 1;
            }
        }
    }

    Ok(ThinObjectReport {
        grid_resolution: setup.grid_resolution,
        frames: setup.frames,
        bar_cells: cells.len(),
        occupied_bar_cells: occupied,
        bar_cell_occupied_fraction: if cells.is_empty() {
            0.0
        } else {
            occupied as f64 / cells.len() as f64
        },
        pointcloud_bar_points: bar_points,
        pointcloud_points: total,
        raw_bar_returns: raw_bar,
        grid_cells_traversed: traversed,
        grid_integrate_s: grid_s,
        map_update_s: map_s,
        grid,
    })
}
