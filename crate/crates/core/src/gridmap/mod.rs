//! Ray-casting log-odds occupancy grid, kept for comparison with the
//! point-cloud map on thin obstacles.

mod experiment;

pub use experiment::{thin_object_experiment, ThinObjectReport, ThinObjectSetup};

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{PointCloud, Vec3};

pub type CellIndex = [i64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogOddsParams {
    pub hit: f64,
    pub miss: f64,
    pub clamp_min: f64,
    pub clamp_max: f64,
    /// Probability above which a cell counts as occupied.
    pub occupied_probability: f64,
}

impl Default for LogOddsParams {
    fn default() -> Self {
        Self {
            hit: 0.85,
            miss: -0.4,
            clamp_min: -2.0,
            clamp_max: 3.5,
            occupied_probability: 0.5,
        }
    }
}

impl LogOddsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hit > 0.0 && self.miss < 0.0 && self.clamp_min < 0.0 && self.clamp_max > 0.0) {
            return Err(CoreError::InvalidArgument("gridmap: inconsistent log-odds parameters".into()));
        }
        if !(self.occupied_probability > 0.0 && self.occupied_probability < 1.0) {
            return Err(CoreError::InvalidArgument("gridmap: occupied_probability must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn occupied_log_odds(&self) -> f64 {
        let p = self.occupied_probability;
        (p / (1.0 - p)).ln()
    }
}

/// Bookkeeping for one `integrate_scan` call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub rays: usize,
    /// Miss updates applied (cells strictly before each endpoint).
    pub cells_traversed: usize,
}

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Vec3,
    params: LogOddsParams,
    cells: HashMap<CellIndex, f64>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64, origin: Vec3, params: LogOddsParams) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(CoreError::InvalidArgument("gridmap: resolution must be positive".into()));
        }
        params.validate()?;
        Ok(Self {
            resolution,
            origin,
            params,
            cells: HashMap::new(),
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn cell_of(&self, p: &Vec3) -> CellIndex {
        let q = (p - self.origin) / self.resolution;
        [q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64]
    }

    /// Axis-aligned bounds of a cell.
    pub fn cell_bounds(&self, c: &CellIndex) -> (Vec3, Vec3) {
        let lo = self.origin + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.resolution;
        (lo, lo + Vec3::repeat(self.resolution))
    }

    pub fn log_odds(&self, c: &CellIndex) -> f64 {
        self.cells.get(c).copied().unwrap_or(0.0)
    }

    pub fn probability(&self, c: &CellIndex) -> f64 {
        1.0 / (1.0 + (-self.log_odds(c)).exp())
    }

    pub fn is_occupied(&self, c: &CellIndex) -> bool {
        self.cells
            .get(c)
            .is_some_and(|&l| l > self.params.occupied_log_odds())
    }

    pub fn known_cells(&self) -> usize {
        self.cells.len()
    }

    fn apply(&mut self, c: CellIndex, delta: f64) {
        let (lo, hi) = (self.params.clamp_min, self.params.clamp_max);
        let entry = self.cells.entry(c).or_insert(0.0);
        *entry = (*entry + delta).clamp(lo, hi);
    }

    /// Every cell on `sensor_origin → point` gets a miss, the endpoint cell a hit.
    pub fn integrate_scan(&mut self, sensor_origin: &Vec3, scan: &PointCloud) -> IntegrationStats {
        let mut stats = IntegrationStats::default();
        let mut cells = Vec::new();
        for p in &scan.points {
            cells.clear();
            traverse_into(sensor_origin, p, self.resolution, &self.origin, &mut cells);
            let end = self.cell_of(p);
            for &c in &cells {
                if c != end {
                    self.apply(c, self.params.miss);
                    stats.cells_traversed += 1;
                }
            }
            self.apply(end, self.params.hit);
            stats.rays += 1;
        }
        stats
    }

    /// `i j k probability` rows sorted by index.
    pub fn export_rows(&self) -> String {
        let mut keys: Vec<&CellIndex> = self.cells.keys().collect();
        keys.sort();
        let mut out = String::from("# i j k probability\n");
        for k in keys {
            let _ = writeln!(out, "{} {} {} {}", k[0], k[1], k[2], self.probability(k));
        }
        out
    }

    /// Rows of the horizontal slice containing height `z`.
    pub fn export_slice(&self, z: f64) -> String {
        let kz = self.cell_of(&Vec3::new(0.0, 0.0, z))[2];
        self.export_rows()
            .lines()
            .filter(|l| l.starts_with('#') || l.split_whitespace().nth(2) == Some(&kz.to_string()))
            .fold(String::new(), |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            })
    }
}

/// Cells crossed by the segment `a → b` on a grid of size `resolution`
/// anchored at `origin`, in visiting order, each exactly once.
pub fn traverse(a: &Vec3, b: &Vec3, resolution: f64, origin: &Vec3) -> Vec<CellIndex> {
    let mut out = Vec::new();
    traverse_into(a, b, resolution, origin, &mut out);
    out
}

fn traverse_into(a: &Vec3, b: &Vec3, resolution: f64, origin: &Vec3, out: &mut Vec<CellIndex>) {
    let pa = (a - origin) / resolution;
    let pb = (b - origin) / resolution;
    let d = pb - pa;
    let mut cell = [pa.x.floor() as i64, pa.y.floor() as i64, pa.z.floor() as i64];
    let end = [pb.x.floor() as i64, pb.y.floor() as i64, pb.z.floor() as i64];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for i in 0..3 {
        if d[i] > 0.0 {
            step[i] = 1;
            t_max[i] = ((cell[i] + 1) as f64 - pa[i]) / d[i];
            t_delta[i] = 1.0 / d[i];
        } else if d[i] < 0.0 {
            step[i] = -1;
            t_max[i] = (cell[i] as f64 - pa[i]) / d[i];
            t_delta[i] = -1.0 / d[i];
        }
    }
    let budget = (end[0] - cell[0]).abs() + (end[1] - cell[1]).abs() + (end[2] - cell[2]).abs();
    out.push(cell);
    for _ in 0..budget {
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > 1.0 {
            break;
        }
        cell[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        out.push(cell);
    }
}
