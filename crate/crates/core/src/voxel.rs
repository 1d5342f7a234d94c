//! Voxel-grid downsampling.
//!
//! Cells are half-open `[k·r, (k+1)·r)` per axis, anchored at the world
//! origin. Each occupied cell keeps the centroid of its points. Output order
//! is the order in which cells were first touched.

use std::collections::HashMap;

use crate::geometry::{PointCloud, Vec3};

pub type VoxelKey = [i64; 3];

#[inline]
pub fn voxel_key(p: &Vec3, resolution: f64) -> VoxelKey {
    [
        (p.x / resolution).floor() as i64,
        (p.y / resolution).floor() as i64,
        (p.z / resolution).floor() as i64,
    ]
}

/// Running per-voxel sums. Feeding points one at a time produces the same
/// centroids, bit for bit, as filtering the concatenated input in one pass.
#[derive(Debug, Clone)]
pub struct VoxelAccumulator {
    resolution: f64,
    index: HashMap<VoxelKey, usize>,
    cells: Vec<(Vec3, u32)>,
}

impl VoxelAccumulator {
    pub fn new(resolution: f64) -> Self {
        assert!(resolution > 0.0, "voxel resolution must be positive");
        Self {
            resolution,
            index: HashMap::new(),
            cells: Vec::new(),
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn clear(&mut self) {
        self.index.clear();
        self.cells.clear();
    }

    pub fn add(&mut self, p: &Vec3) {
        let key = voxel_key(p, self.resolution);
        match self.index.get(&key) {
            Some(&i) => {
                let cell = &mut self.cells[i];
                cell.0 += p;
                cell.1 += 1;
            }
            None => {
                self.index.insert(key, self.cells.len());
                self.cells.push((*p, 1));
            }
        }
    }

    pub fn extend<'a>(&mut self, points: impl IntoIterator<Item = &'a Vec3>) {
        for p in points {
            self.add(p);
        }
    }

    pub fn occupied(&self) -> usize {
        self.cells.len()
    }

    pub fn centroids(&self) -> Vec<Vec3> {
        self.cells
            .iter()
            .map(|(sum, n)| sum / f64::from(*n))
            .collect()
    }
}

/// One centroid per occupied voxel of size `resolution`.
///
/// # Panics
///
/// If `resolution` is not strictly positive.
pub fn voxel_filter(cloud: &PointCloud, resolution: f64) -> PointCloud {
    let mut acc = VoxelAccumulator::new(resolution);
    acc.extend(&cloud.points);
    PointCloud::new(acc.centroids(), cloud.stamp)
}
