//! Static 3-d tree over a point set, rebuilt from scratch on every update.
//!
//! Nodes are laid out implicitly: the median of a slice sits at
//! `lo + len / 2`, its subtrees occupy the two halves. The split axis is the
//! one with the largest extent in the slice.

use std::cmp::Ordering;

use super::NeighborHit;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Default)]
pub struct KdTree {
    /// Insertion order, as given to `build`.
    points: Vec<Vec3>,
    /// (point, insertion index) in tree layout.
    nodes: Vec<(Vec3, u32)>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn build(points: Vec<Vec3>) -> Self {
        let mut nodes: Vec<(Vec3, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i as u32))
            .collect();
        let mut axes = vec![0u8; nodes.len()];
        build_rec(&mut nodes, &mut axes);
        Self {
            points,
            nodes,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Stored points in insertion order.
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Closest stored point with distance `<= r`; ties go to the lowest
    /// insertion index.
    pub fn nearest_within(&self, q: &Vec3, r: f64) -> Option<NeighborHit> {
        let mut best = Best {
            d2: r * r,
            idx: u32::MAX,
        };
        self.nearest_rec(0, self.nodes.len(), q, &mut best);
        (best.idx != u32::MAX).then(|| NeighborHit {
            point: self.points[best.idx as usize],
            distance: best.d2.sqrt(),
            index: best.idx as usize,
            tree: 0,
        })
    }

    fn nearest_rec(&self, lo: usize, hi: usize, q: &Vec3, best: &mut Best) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let (p, idx) = &self.nodes[mid];
        let d2 = (p - q).norm_squared();
        if d2 < best.d2 || (d2 == best.d2 && *idx < best.idx) {
            best.d2 = d2;
            best.idx = *idx;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(near.0, near.1, q, best);
        if diff * diff <= best.d2 {
            self.nearest_rec(far.0, far.1, q, best);
        }
    }

    /// True if any stored point lies within `r` of `q`.
    pub fn any_within(&self, q: &Vec3, r: f64) -> bool {
        self.any_rec(0, self.nodes.len(), q, r * r)
    }

    fn any_rec(&self, lo: usize, hi: usize, q: &Vec3, r2: f64) -> bool {
        if lo >= hi {
            return false;
        }
        let mid = lo + (hi - lo) / 2;
        let (p, _) = &self.nodes[mid];
        if (p - q).norm_squared() <= r2 {
            return true;
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.any_rec(near.0, near.1, q, r2) || (diff * diff <= r2 && self.any_rec(far.0, far.1, q, r2))
    }

    /// Insertion indices of all points within `r` of `q`, ascending.
    pub fn within_radius(&self, q: &Vec3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(0, self.nodes.len(), q, r * r, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, lo: usize, hi: usize, q: &Vec3, r2: f64, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let (p, idx) = &self.nodes[mid];
        if (p - q).norm_squared() <= r2 {
            out.push(*idx as usize);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.radius_rec(lo, mid, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.radius_rec(mid + 1, hi, q, r2, out);
        }
    }
}

struct Best {
    d2: f64,
    idx: u32,
}

fn build_rec(nodes: &mut [(Vec3, u32)], axes: &mut [u8]) {
    if nodes.len() <= 1 {
        return;
    }
    let mut min = nodes[0].0;
    let mut max = nodes[0].0;
    for (p, _) in nodes.iter() {
        min = min.inf(p);
        max = max.sup(p);
    }
    let axis = (max - min).imax();
    let mid = nodes.len() / 2;
    nodes.select_nth_unstable_by(mid, |a, b| {
        a.0[axis]
            .partial_cmp(&b.0[axis])
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    axes[mid] = axis as u8;
    let (left, rest) = nodes.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build_rec(left, left_axes);
    build_rec(&mut rest[1..], &mut rest_axes[1..]);
}
