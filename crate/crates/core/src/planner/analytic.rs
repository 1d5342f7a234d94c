//! Closed-form connection from a search node to the goal at rest.

use super::PlannerConfig;
use crate::geometry::Vec3;
use crate::spatial::CollisionQuery;
use crate::state::UavState;
use crate::trajectory::{sample_times, PolynomialSegment};

/// Shortest candidate duration; also the duration used when already at the goal.
const MIN_DURATION: f64 = 0.1;
/// Peak acceleration of a rest-to-rest quintic is `10/√3 · D / T²`.
const QUINTIC_PEAK_ACCEL: f64 = 5.773_502_691_896_258;
const DURATION_FACTORS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];

/// Tries quintic connections from `state` to `goal` (zero velocity and
/// acceleration) over increasing durations; returns the first one that is
/// collision-free at the check density and within the kinodynamic limits.
pub fn analytic_expansion<M: CollisionQuery + ?Sized>(
    state: &UavState,
    goal: &Vec3,
    cfg: &PlannerConfig,
    map: &M,
) -> Option<PolynomialSegment> {
    let lim = &cfg.limits;
    let d = (goal - state.p).norm();
    let base = (d / lim.v_max)
        .max((QUINTIC_PEAK_ACCEL * d / lim.a_max).sqrt())
        .max(state.v.amax() / lim.a_max)
        .max(MIN_DURATION);
    let step = cfg.check_step();

    'candidates: for factor in DURATION_FACTORS {
        let duration = base * factor;
        let Ok(seg) =
            PolynomialSegment::connect(state, *goal, Vec3::zeros(), Vec3::zeros(), duration)
        else {
            continue;
        };
        if !within_limits(&seg, cfg) {
            continue;
        }
        let Ok(times) = sample_times(0.0, duration, step) else {
            return None;
        };
        for s in times {
            let p = seg_position(&seg, s);
            if !cfg.in_workspace(&p) || map.any_within(&p, cfg.clearance) {
                continue 'candidates;
            }
        }
        return Some(seg);
    }
    None
}

fn seg_position(seg: &PolynomialSegment, s: f64) -> Vec3 {
    Vec3::from_fn(|axis, _| {
        let c = &seg.coeffs[axis];
        c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))))
    })
}

fn within_limits(seg: &PolynomialSegment, cfg: &PlannerConfig) -> bool {
    const EPS: f64 = 1e-9;
    let (v_peak, a_peak) = axis_extrema(seg);
    if a_peak.iter().any(|&a| a > cfg.limits.a_max + EPS) {
        return false;
    }
    match cfg.velocity_bound {
        super::VelocityBound::PerAxis => v_peak.iter().all(|&v| v <= cfg.limits.v_max + EPS),
        // the norm bound has no cheap closed form; check densely
        super::VelocityBound::Norm => {
            let n = 200;
            (0..=n).all(|k| {
                let s = seg.duration * k as f64 / n as f64;
                let v = Vec3::from_fn(|axis, _| poly_eval(&vel_coeffs(&seg.coeffs[axis]), s));
                v.norm() <= cfg.limits.v_max + EPS
            })
        }
    }
}

/// Exact per-axis maxima of `|v|` and `|a|` over the segment.
pub fn axis_extrema(seg: &PolynomialSegment) -> ([f64; 3], [f64; 3]) {
    let t = seg.duration;
    let mut v_peak = [0.0; 3];
    let mut a_peak = [0.0; 3];
    for (axis, c) in seg.coeffs.iter().enumerate() {
        let vc = vel_coeffs(c);
        let ac = [2.0 * c[2], 6.0 * c[3], 12.0 * c[4], 20.0 * c[5]];
        let jc = [6.0 * c[3], 24.0 * c[4], 60.0 * c[5]];

        let mut jerk_roots = quadratic_roots(jc[0], jc[1], jc[2], t);
        jerk_roots.sort_by(f64::total_cmp);

        let mut a_max = poly_eval(&ac, 0.0).abs().max(poly_eval(&ac, t).abs());
        for &r in &jerk_roots {
            a_max = a_max.max(poly_eval(&ac, r).abs());
        }

        // acceleration is monotone between jerk roots: at most one zero per piece
        let mut knots = vec![0.0];
        knots.extend(jerk_roots.iter().copied());
        knots.push(t);
        let mut v_max = poly_eval(&vc, 0.0).abs().max(poly_eval(&vc, t).abs());
        for w in knots.windows(2) {
            if let Some(r) = bisect_root(&ac, w[0], w[1]) {
                v_max = v_max.max(poly_eval(&vc, r).abs());
            }
        }
        v_peak[axis] = v_max;
        a_peak[axis] = a_max;
    }
    (v_peak, a_peak)
}

fn vel_coeffs(c: &[f64; 6]) -> [f64; 5] {
    [c[1], 2.0 * c[2], 3.0 * c[3], 4.0 * c[4], 5.0 * c[5]]
}

fn poly_eval(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * s + k)
}

/// Real roots of `c0 + c1 s + c2 s²` strictly inside `(0, t)`.
fn quadratic_roots(c0: f64, c1: f64, c2: f64, t: f64) -> Vec<f64> {
    let scale = c0.abs().max(c1.abs() * t).max(c2.abs() * t * t);
    let mut roots = Vec::with_capacity(2);
    if scale == 0.0 {
        return roots;
    }
    if c2.abs() * t * t <= 1e-12 * scale {
        if c1 != 0.0 {
            roots.push(-c0 / c1);
        }
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (c1 + c1.signum() * sq);
            if q != 0.0 {
                roots.push(q / c2);
                roots.push(c0 / q);
            } else {
                roots.push(0.0);
            }
        }
    }
    roots.retain(|&r| r > 0.0 && r < t);
    roots
}

fn bisect_root(c: &[f64], mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut flo = poly_eval(c, lo);
    let fhi = poly_eval(c, hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let fm = poly_eval(c, mid);
        if fm == 0.0 || hi - lo < 1e-14 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
