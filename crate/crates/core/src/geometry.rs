//! Points, point clouds and the columnar text format used for dumps.
//!
//! Text format, one cloud per file:
//!
//! ```text
//! # stamp <seconds> count <n>
//! <x> <y> <z>
//! ...
//! ```
//!
//! Coordinates are written with Rust's shortest round-trip `f64` formatting,
//! so a write/read cycle reproduces every coordinate bit-for-bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{CoreError, Result};

/// World-frame vector or point, meters.
pub type Vec3 = nalgebra::Vector3<f64>;

/// A timestamped set of world-frame points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Seconds since scenario start.
    pub stamp: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, stamp: f64) -> Self {
        Self { points, stamp }
    }

    pub fn empty(stamp: f64) -> Self {
        Self {
            points: Vec::new(),
            stamp,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 + self.points.len() * 48);
        let _ = writeln!(out, "# stamp {} count {}", self.stamp, self.points.len());
        for p in &self.points {
            let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
        }
        out
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (stamp, count) = match lines.next() {
            Some((_, line)) => parse_header(&line?)?,
            None => {
                return Err(CoreError::CloudFormat {
                    line: 1,
                    msg: "missing header".into(),
                })
            }
        };
        let mut points = Vec::with_capacity(count);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| CoreError::CloudFormat {
                line: idx + 1,
                msg: msg.to_string(),
            };
            let coords: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| bad("bad coordinate")))
                .collect::<Result<_>>()?;
            if coords.len() != 3 {
                return Err(bad("expected three coordinates"));
            }
            points.push(Vec3::new(coords[0], coords[1], coords[2]));
        }
        if points.len() != count {
            return Err(CoreError::CloudFormat {
                line: 1,
                msg: format!("header count {count} but {} points", points.len()),
            });
        }
        Ok(Self { points, stamp })
    }
}

fn parse_header(line: &str) -> Result<(f64, usize)> {
    let bad = || CoreError::CloudFormat {
        line: 1,
        msg: format!("bad header {line:?}"),
    };
    let toks: Vec<&str> = line.split_whitespace().collect();
    match toks.as_slice() {
        ["#", "stamp", s, "count", n] => Ok((
            s.parse().map_err(|_| bad())?,
            n.parse().map_err(|_| bad())?,
        )),
        _ => Err(bad()),
    }
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let cloud = PointCloud::new(
            vec![
                Vec3::new(0.1, -2.0 / 3.0, 1e-17),
                Vec3::new(123.456, 7.0, -0.0),
            ],
            0.02,
        );
        let text = cloud.to_text();
        assert!(text.starts_with("# stamp 0.02 count 2\n"));
        let back = PointCloud::read_text(text.as_bytes()).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn rejects_count_mismatch() {
        let err = PointCloud::read_text("# stamp 0 count 2\n1 2 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CoreError::CloudFormat { .. }));
    }

    #[test]
    fn segment_distance() {
        let a = Vec3::zeros();
        let b = Vec3::new(2.0, 0.0, 0.0);
        assert!((point_segment_distance(&Vec3::new(1.0, 0.2, 0.0), &a, &b) - 0.2).abs() < 1e-15);
        assert!((point_segment_distance(&Vec3::new(3.0, 0.0, 0.0), &a, &b) - 1.0).abs() < 1e-15);
    }
}
