//! Two (or more) KD-trees cycling over fixed windows of scans.
//!
//! Every update rebuilds exactly one tree from the voxel-filtered
//! accumulation of the scans assigned to it:
//!
//! 1. once `H·N` scans have been consumed the counters wrap to zero, else the
//!    target tree is `scan_input_num / H`,
//! 2. the accumulation restarts at the first scan of each window and grows
//!    otherwise,
//! 3. the accumulation is voxel-filtered and the target tree rebuilt from
//!    scratch,
//! 4. `scan_input_num` advances.
//!
//! The other trees are left alone, so the map always holds between `H` and
//! `2H` scans of history for `N = 2` (the full tree plus the growing one).

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{CollisionQuery, KdTree, NeighborHit};
use crate::error::{CoreError, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::voxel::VoxelAccumulator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Scans per tree (`H`).
    pub scans_per_tree: usize,
    /// Number of trees (`N`).
    pub tree_count: usize,
    /// Voxel filter cell size, meters.
    pub resolution: f64,
    /// Safety clearance, meters.
    pub clearance: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            scans_per_tree: 50,
            tree_count: 2,
            resolution: 0.1,
            clearance: 0.45,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scans_per_tree < 1 {
            return Err(CoreError::InvalidArgument("map: scans_per_tree must be >= 1".into()));
        }
        if self.tree_count < 2 {
            return Err(CoreError::InvalidArgument("map: tree_count must be >= 2".into()));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(CoreError::InvalidArgument("map: resolution must be positive".into()));
        }
        if !(self.clearance > 0.0 && self.clearance.is_finite()) {
            return Err(CoreError::InvalidArgument("map: clearance must be positive".into()));
        }
        Ok(())
    }

    /// Seconds of history held by one tree at the given scan rate.
    pub fn accumulation_time(&self, frame_rate: f64) -> f64 {
        self.scans_per_tree as f64 / frame_rate
    }
}

/// What one update did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapUpdate {
    /// Index of the rebuilt tree.
    pub tree: usize,
    /// The accumulation buffer was restarted with this scan.
    pub cleared: bool,
    /// Counters wrapped to zero before this scan (the oldest tree is overwritten).
    pub wrapped: bool,
    /// Points in the rebuilt tree.
    pub tree_size: usize,
    /// Accumulate + filter + build.
    pub total_time: Duration,
    /// Tree build alone.
    pub build_time: Duration,
}

#[derive(Debug, Clone)]
pub struct TemporalLocalMap {
    config: MapConfig,
    trees: Vec<Arc<KdTree>>,
    accumulation: VoxelAccumulator,
    scan_input_num: usize,
    tree_input_num: usize,
    last_stamp: Option<f64>,
}

impl TemporalLocalMap {
    pub fn new(config: MapConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            trees: (0..config.tree_count)
                .map(|_| Arc::new(KdTree::default()))
                .collect(),
            accumulation: VoxelAccumulator::new(config.resolution),
            scan_input_num: 0,
            tree_input_num: 0,
            last_stamp: None,
            config,
        })
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn scan_input_num(&self) -> usize {
        self.scan_input_num
    }

    /// Tree rebuilt by the most recent update.
    pub fn tree_input_num(&self) -> usize {
        self.tree_input_num
    }

    pub fn trees(&self) -> &[Arc<KdTree>] {
        &self.trees
    }

    pub fn tree_sizes(&self) -> Vec<usize> {
        self.trees.iter().map(|t| t.len()).collect()
    }

    pub fn update(&mut self, scan: &PointCloud) -> Result<MapUpdate> {
        if let Some(last) = self.last_stamp {
            if scan.stamp < last {
                return Err(CoreError::InvalidArgument(format!(
                    "scan stamp {} precedes previous scan {last}",
                    scan.stamp
                )));
            }
        }
        let start = Instant::now();
        let h = self.config.scans_per_tree;
        let wrapped = self.scan_input_num >= h * self.config.tree_count;
        if wrapped {
            self.scan_input_num = 0;
            self.tree_input_num = 0;
        } else {
            self.tree_input_num = self.scan_input_num / h;
        }
        let cleared = self.scan_input_num % h == 0;
        if cleared {
            self.accumulation.clear();
        }
        self.accumulation.extend(&scan.points);
        let filtered = self.accumulation.centroids();

        let build_start = Instant::now();
        let tree = KdTree::build(filtered);
        let build_time = build_start.elapsed();
        let tree_size = tree.len();
        self.trees[self.tree_input_num] = Arc::new(tree);
        self.scan_input_num += 1;
        self.last_stamp = Some(scan.stamp);

        Ok(MapUpdate {
            tree: self.tree_input_num,
            cleared,
            wrapped,
            tree_size,
            total_time: start.elapsed(),
            build_time,
        })
    }

    /// Read-only view of the current trees, cheap to clone and send.
    pub fn snapshot(&self) -> MapSnapshot {
        MapSnapshot {
            trees: self.trees.clone(),
        }
    }

    /// True iff any tree holds a point within `clearance` of `q`, with the
    /// globally nearest such point.
    pub fn collision(&self, q: &Vec3, clearance: f64) -> Option<NeighborHit> {
        nearest_over(&self.trees, q, clearance)
    }

    /// Writes `tree_<i>.txt` per tree plus `counters.txt`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let stamp = self.last_stamp.unwrap_or(0.0);
        for (i, tree) in self.trees.iter().enumerate() {
            let cloud = PointCloud::new(tree.points().to_vec(), stamp);
            let file = std::fs::File::create(dir.join(format!("tree_{i}.txt")))?;
            cloud.write_text(std::io::BufWriter::new(file))?;
        }
        let mut f = std::fs::File::create(dir.join("counters.txt"))?;
        let sizes: Vec<String> = self.tree_sizes().iter().map(|s| s.to_string()).collect();
        writeln!(
            f,
            "scan_input_num {} tree_input_num {} tree_sizes {}",
            self.scan_input_num,
            self.tree_input_num,
            sizes.join(" ")
        )?;
        Ok(())
    }
}

impl CollisionQuery for TemporalLocalMap {
    fn nearest_within(&self, q: &Vec3, r: f64) -> Option<NeighborHit> {
        nearest_over(&self.trees, q, r)
    }

    fn any_within(&self, q: &Vec3, r: f64) -> bool {
        self.trees.iter().any(|t| t.any_within(q, r))
    }
}

/// Immutable view of the trees at one instant.
#[derive(Debug, Clone)]
pub struct MapSnapshot {
    trees: Vec<Arc<KdTree>>,
}

impl MapSnapshot {
    pub fn trees(&self) -> &[Arc<KdTree>] {
        &self.trees
    }
}

impl CollisionQuery for MapSnapshot {
    fn nearest_within(&self, q: &Vec3, r: f64) -> Option<NeighborHit> {
        nearest_over(&self.trees, q, r)
    }

    fn any_within(&self, q: &Vec3, r: f64) -> bool {
        self.trees.iter().any(|t| t.any_within(q, r))
    }
}

/// Nearest over several trees; ties prefer the lower tree, then lower index.
fn nearest_over(trees: &[Arc<KdTree>], q: &Vec3, r: f64) -> Option<NeighborHit> {
    let mut best: Option<NeighborHit> = None;
    for (i, tree) in trees.iter().enumerate() {
        if let Some(mut hit) = tree.nearest_within(q, r) {
            hit.tree = i;
            if best.is_none_or(|b| hit.distance < b.distance) {
                best = Some(hit);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::voxel_filter;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(h: usize, n: usize) -> MapConfig {
        MapConfig {
            scans_per_tree: h,
            tree_count: n,
            resolution: 0.1,
            clearance: 0.45,
        }
    }

    fn scan(rng: &mut ChaCha8Rng, n: usize, stamp: f64) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Vec3::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                    )
                })
                .collect(),
            stamp,
        )
    }

    #[test]
    fn rejects_bad_config() {
        assert!(TemporalLocalMap::new(cfg(0, 2)).is_err());
        assert!(TemporalLocalMap::new(cfg(1, 1)).is_err());
        let mut c = cfg(1, 2);
        c.resolution = 0.0;
        assert!(TemporalLocalMap::new(c).is_err());
    }

    #[test]
    fn five_scans_two_per_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scans: Vec<PointCloud> = (0..5).map(|i| scan(&mut rng, 50, i as f64)).collect();
        let mut map = TemporalLocalMap::new(cfg(2, 2)).unwrap();
        let mut trees_hit = Vec::new();
        for s in &scans {
            trees_hit.push(map.update(s).unwrap().tree);
        }
        assert_eq!(trees_hit, vec![0, 0, 1, 1, 0]);
        let expect0 = voxel_filter(&scans[4], 0.1).points;
        let mut cd = scans[2].points.clone();
        cd.extend_from_slice(&scans[3].points);
        let expect1 = voxel_filter(&PointCloud::new(cd, 0.0), 0.1).points;
        assert_eq!(map.trees()[0].points(), expect0.as_slice());
        assert_eq!(map.trees()[1].points(), expect1.as_slice());
    }

    #[test]
    fn default_schedule_h50() {
        let mut map = TemporalLocalMap::new(cfg(50, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..101 {
            let s = scan(&mut rng, 5, i as f64 * 0.02);
            let u = map.update(&s).unwrap();
            match i {
                0..=49 => assert_eq!(u.tree, 0),
                50 => {
                    assert_eq!(u.tree, 1);
                    assert!(u.cleared);
                    assert_eq!(map.trees()[1].points(), voxel_filter(&s, 0.1).points.as_slice());
                }
                51..=99 => assert_eq!(u.tree, 1),
                100 => {
                    assert_eq!(u.tree, 0);
                    assert!(u.wrapped && u.cleared);
                    assert_eq!(map.trees()[0].points(), voxel_filter(&s, 0.1).points.as_slice());
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn repeated_scan_fills_every_tree_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = scan(&mut rng, 300, 0.0);
        let mut map = TemporalLocalMap::new(cfg(3, 2)).unwrap();
        for _ in 0..6 {
            map.update(&s).unwrap();
        }
        let once = voxel_filter(&s, 0.1);
        for tree in map.trees() {
            let mut got = tree.points().to_vec();
            let mut want = once.points.clone();
            let key = |p: &Vec3| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
            got.sort_by_key(key);
            want.sort_by_key(key);
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn other_tree_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut map = TemporalLocalMap::new(cfg(2, 2)).unwrap();
        for i in 0..7 {
            let before = map.trees().to_vec();
            let u = map.update(&scan(&mut rng, 20, i as f64)).unwrap();
            for (j, t) in map.trees().iter().enumerate() {
                if j != u.tree {
                    assert!(Arc::ptr_eq(t, &before[j]));
                }
            }
        }
    }

    #[test]
    fn dynamic_tree_alone_triggers_collision() {
        let mut map = TemporalLocalMap::new(cfg(1, 2)).unwrap();
        assert!(map.collision(&Vec3::zeros(), 0.45).is_none());
        map.update(&PointCloud::new(vec![Vec3::new(10.0, 0.0, 0.0)], 0.0)).unwrap();
        map.update(&PointCloud::new(vec![Vec3::new(0.3, 0.0, 0.0)], 0.02)).unwrap();
        let hit = map.collision(&Vec3::zeros(), 0.45).unwrap();
        assert_eq!(hit.tree, 1);
        assert!((hit.distance - 0.3).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_order_scans() {
        let mut map = TemporalLocalMap::new(cfg(2, 2)).unwrap();
        map.update(&PointCloud::empty(1.0)).unwrap();
        assert!(map.update(&PointCloud::empty(0.5)).is_err());
    }

    #[test]
    fn dump_writes_trees_and_counters() {
        let dir = tempfile::tempdir().unwrap();
        let mut map = TemporalLocalMap::new(cfg(2, 2)).unwrap();
        map.update(&PointCloud::new(vec![Vec3::new(1.0, 2.0, 3.0)], 0.0)).unwrap();
        map.dump(dir.path()).unwrap();
        let counters = std::fs::read_to_string(dir.path().join("counters.txt")).unwrap();
        assert_eq!(counters.trim(), "scan_input_num 1 tree_input_num 0 tree_sizes 1 0");
        let f = std::fs::File::open(dir.path().join("tree_0.txt")).unwrap();
        let cloud = PointCloud::read_text(std::io::BufReader::new(f)).unwrap();
        assert_eq!(cloud.len(), 1);
    }
}
