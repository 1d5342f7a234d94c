//! Piecewise trajectories built from constant-acceleration primitives and
//! quintic connection segments.
//!
//! Position and velocity are continuous across joins; acceleration may jump.

use crate::error::{CoreError, Result};
use crate::geometry::Vec3;
use crate::state::{propagate_unchecked, UavState};

/// Tolerance on position/velocity gaps between consecutive segments.
pub const JOIN_TOLERANCE: f64 = 1e-9;

/// One motion primitive: constant control `u` held for `tau` seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantAccelSegment {
    pub start: UavState,
    pub u: Vec3,
    pub tau: f64,
}

impl ConstantAccelSegment {
    pub fn new(start: UavState, u: Vec3, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "segment duration must be positive, got {tau}"
            )));
        }
        if !start.is_finite() || !u.iter().all(|c| c.is_finite()) {
            return Err(CoreError::InvalidArgument("non-finite segment".into()));
        }
        Ok(Self { start, u, tau })
    }

    pub fn end_state(&self) -> UavState {
        propagate_unchecked(&self.start, &self.u, self.tau)
    }

    fn state_at_local(&self, s: f64) -> UavState {
        propagate_unchecked(&self.start, &self.u, s)
    }
}

/// Per-axis quintic `p(s) = Σ c_k s^k` for local time `s ∈ [0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialSegment {
    pub t0: f64,
    pub coeffs: [[f64; 6]; 3],
    pub duration: f64,
}

impl PolynomialSegment {
    /// Solves the two-point boundary-value problem between full
    /// position/velocity/acceleration states over `duration`.
    pub fn connect(from: &UavState, to_p: Vec3, to_v: Vec3, to_a: Vec3, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "quintic duration must be positive, got {duration}"
            )));
        }
        let t = duration;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let mut coeffs = [[0.0; 6]; 3];
        for (axis, c) in coeffs.iter_mut().enumerate() {
            let (p0, v0, a0) = (from.p[axis], from.v[axis], from.a[axis]);
            let (p1, v1, a1) = (to_p[axis], to_v[axis], to_a[axis]);
            let h = p1 - p0 - v0 * t - 0.5 * a0 * t2;
            let dv = v1 - v0 - a0 * t;
            let da = a1 - a0;
            c[0] = p0;
            c[1] = v0;
            c[2] = 0.5 * a0;
            c[3] = (10.0 * h - 4.0 * dv * t + 0.5 * da * t2) / t3;
            c[4] = (-15.0 * h + 7.0 * dv * t - da * t2) / t4;
            c[5] = (6.0 * h - 3.0 * dv * t + 0.5 * da * t2) / t5;
        }
        Ok(Self {
            t0: from.t,
            coeffs,
            duration,
        })
    }

    fn state_at_local(&self, s: f64) -> UavState {
        let mut p = Vec3::zeros();
        let mut v = Vec3::zeros();
        let mut a = Vec3::zeros();
        for (axis, c) in self.coeffs.iter().enumerate() {
            p[axis] = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
            v[axis] = c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])));
            a[axis] = 2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]));
        }
        UavState {
            t: self.t0 + s,
            p,
            v,
            a,
        }
    }

    /// Re-expands the polynomial around local time `s`.
    fn shifted(&self, s: f64, duration: f64) -> Self {
        const BINOM: [[f64; 6]; 6] = [
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 3.0, 3.0, 1.0, 0.0, 0.0],
            [1.0, 4.0, 6.0, 4.0, 1.0, 0.0],
            [1.0, 5.0, 10.0, 10.0, 5.0, 1.0],
        ];
        let mut coeffs = [[0.0; 6]; 3];
        for (axis, c) in self.coeffs.iter().enumerate() {
            for k in 0..6 {
                let mut acc = 0.0;
                for j in (k..6).rev() {
                    acc += BINOM[j][k] * c[j] * s.powi((j - k) as i32);
                }
                coeffs[axis][k] = acc;
            }
        }
        Self {
            t0: self.t0 + s,
            coeffs,
            duration,
        }
    }

    /// Control effort `∫ ‖a‖² ds` over the whole segment, exact for the quintic.
    pub fn effort(&self) -> f64 {
        // a(s) = Σ_{k=2..5} k(k-1) c_k s^{k-2}; integrate the square term by term.
        let t = self.duration;
        let mut total = 0.0;
        for c in &self.coeffs {
            let q: Vec<(f64, i32)> = (2..6)
                .map(|k| ((k * (k - 1)) as f64 * c[k], (k - 2) as i32))
                .collect();
            for &(qi, ei) in &q {
                for &(qj, ej) in &q {
                    let e = ei + ej + 1;
                    total += qi * qj * t.powi(e) / e as f64;
                }
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    ConstantAccel(ConstantAccelSegment),
    Polynomial(PolynomialSegment),
}

impl Segment {
    pub fn start_time(&self) -> f64 {
        match self {
            Segment::ConstantAccel(s) => s.start.t,
            Segment::Polynomial(s) => s.t0,
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            Segment::ConstantAccel(s) => s.tau,
            Segment::Polynomial(s) => s.duration,
        }
    }

    pub fn end_time(&self) -> f64 {
        self.start_time() + self.duration()
    }

    /// State at absolute time `t`, clamped to the segment's span.
    pub fn state_at(&self, t: f64) -> UavState {
        let s = (t - self.start_time()).clamp(0.0, self.duration());
        match self {
            Segment::ConstantAccel(seg) => seg.state_at_local(s),
            Segment::Polynomial(seg) => seg.state_at_local(s),
        }
    }

    /// The part of this segment between absolute times `ta < tb`.
    fn window(&self, ta: f64, tb: f64) -> Segment {
        let s = (ta - self.start_time()).clamp(0.0, self.duration());
        let len = (tb - ta).min(self.duration() - s);
        match self {
            Segment::ConstantAccel(seg) => Segment::ConstantAccel(ConstantAccelSegment {
                start: seg.state_at_local(s),
                u: seg.u,
                tau: len,
            }),
            Segment::Polynomial(seg) => Segment::Polynomial(seg.shifted(s, len)),
        }
    }
}

/// A time-contiguous chain of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    segments: Vec<Segment>,
    t0: f64,
    duration: f64,
}

impl Trajectory {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| CoreError::InvalidArgument("trajectory needs a segment".into()))?;
        let t0 = first.start_time();
        for pair in segments.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let t_join = next.start_time();
            if (prev.end_time() - t_join).abs() > JOIN_TOLERANCE {
                return Err(CoreError::InvalidArgument(format!(
                    "segments not time-contiguous at t={t_join}"
                )));
            }
            let end = prev.state_at(prev.end_time());
            let start = next.state_at(t_join);
            let gap_p = (end.p - start.p).norm();
            let gap_v = (end.v - start.v).norm();
            if gap_p > JOIN_TOLERANCE || gap_v > JOIN_TOLERANCE {
                return Err(CoreError::Discontinuity {
                    t: t_join,
                    gap_p,
                    gap_v,
                });
            }
        }
        let last = segments.last().expect("non-empty");
        let duration = last.end_time() - t0;
        Ok(Self {
            segments,
            t0,
            duration,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration
    }

    fn segment_index(&self, t: f64) -> usize {
        // last segment whose start is <= t
        let idx = self.segments.partition_point(|s| s.start_time() <= t);
        idx.saturating_sub(1)
    }

    /// State at absolute time `t`, clamped to `[t0, t0 + duration]`.
    pub fn state_at(&self, t: f64) -> UavState {
        let t = t.clamp(self.t0, self.end_time());
        let mut state = self.segments[self.segment_index(t)].state_at(t);
        state.t = t;
        state
    }

    pub fn start_state(&self) -> UavState {
        self.state_at(self.t0)
    }

    pub fn end_state(&self) -> UavState {
        self.state_at(self.end_time())
    }

    /// States on the grid `t0, t0+dt, …` with the exact end time always included.
    pub fn sample(&self, dt: f64) -> Result<Vec<UavState>> {
        self.sample_from(self.t0, dt)
    }

    /// Like [`Trajectory::sample`], starting at `from` (clamped into the span).
    pub fn sample_from(&self, from: f64, dt: f64) -> Result<Vec<UavState>> {
        sample_times(from.clamp(self.t0, self.end_time()), self.end_time(), dt)
            .map(|times| times.into_iter().map(|t| self.state_at(t)).collect())
    }

    /// The sub-trajectory covering `[ta, tb]`.
    pub fn window(&self, ta: f64, tb: f64) -> Result<Self> {
        let ta = ta.clamp(self.t0, self.end_time());
        let tb = tb.clamp(ta, self.end_time());
        if tb - ta <= 0.0 {
            return Err(CoreError::InvalidArgument("empty trajectory window".into()));
        }
        let segments = self
            .segments
            .iter()
            .filter(|s| s.end_time() > ta && s.start_time() < tb)
            .map(|s| {
                let a = ta.max(s.start_time());
                s.window(a, tb)
            })
            .filter(|s| s.duration() > 0.0)
            .collect();
        Self::new(segments)
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn concat(&self, next: &Trajectory) -> Result<Self> {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&next.segments);
        Self::new(segments)
    }

    /// Arc length approximated on a fine time grid.
    pub fn path_length(&self, dt: f64) -> Result<f64> {
        let samples = self.sample(dt)?;
        Ok(samples.windows(2).map(|w| (w[1].p - w[0].p).norm()).sum())
    }
}

/// Time grid `from, from+dt, …, to` (end inclusive, no near-duplicate before it).
pub fn sample_times(from: f64, to: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "sampling step must be positive, got {dt}"
        )));
    }
    let span = to - from;
    let mut out = Vec::with_capacity((span / dt).max(0.0) as usize + 2);
    let eps = 1e-9 * dt.max(1.0);
    let mut k = 0usize;
    loop {
        let off = k as f64 * dt;
        if off >= span - eps {
            break;
        }
        out.push(from + off);
        k += 1;
    }
    out.push(to);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::propagate;

    fn prim(start: UavState, u: Vec3, tau: f64) -> Segment {
        Segment::ConstantAccel(ConstantAccelSegment::new(start, u, tau).unwrap())
    }

    fn offsets(traj: &Trajectory, dt: f64) -> Vec<f64> {
        traj.sample(dt)
            .unwrap()
            .iter()
            .map(|s| s.t - traj.t0())
            .collect()
    }

    #[test]
    fn sample_grid_includes_endpoint() {
        let s0 = UavState::at_rest(0.0, Vec3::zeros());
        let t = Trajectory::new(vec![prim(s0, Vec3::new(1.0, 0.0, 0.0), 0.6)]).unwrap();
        let off = offsets(&t, 0.2);
        assert_eq!(off.len(), 4);
        for (o, e) in off.iter().zip([0.0, 0.2, 0.4, 0.6]) {
            assert!((o - e).abs() < 1e-12);
        }

        let t = Trajectory::new(vec![prim(s0, Vec3::zeros(), 0.5)]).unwrap();
        let off = offsets(&t, 0.2);
        assert_eq!(off.len(), 4);
        for (o, e) in off.iter().zip([0.0, 0.2, 0.4, 0.5]) {
            assert!((o - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_positive_step() {
        let s0 = UavState::at_rest(0.0, Vec3::zeros());
        let t = Trajectory::new(vec![prim(s0, Vec3::zeros(), 0.5)]).unwrap();
        assert!(t.sample(0.0).is_err());
        assert!(t.sample(-0.1).is_err());
    }

    #[test]
    fn chained_primitives_match_closed_form() {
        let s0 = UavState {
            t: 1.0,
            p: Vec3::new(0.0, 1.0, 2.0),
            v: Vec3::new(0.5, 0.0, 0.0),
            a: Vec3::zeros(),
        };
        let u1 = Vec3::new(2.0, -2.0, 0.0);
        let u2 = Vec3::new(-2.0, 0.0, 2.0);
        let s1 = propagate(&s0, &u1, 0.6).unwrap();
        let t = Trajectory::new(vec![prim(s0, u1, 0.6), prim(s1, u2, 0.6)]).unwrap();
        for st in t.sample(0.05).unwrap() {
            let local = st.t - s0.t;
            // independent per-segment evaluation
            let (p, v) = if local <= 0.6 {
                (
                    s0.p + s0.v * local + u1 * (0.5 * local * local),
                    s0.v + u1 * local,
                )
            } else {
                let s = local - 0.6;
                let p1 = s0.p + s0.v * 0.6 + u1 * 0.18;
                let v1 = s0.v + u1 * 0.6;
                (p1 + v1 * s + u2 * (0.5 * s * s), v1 + u2 * s)
            };
            assert!((st.p - p).norm() < 1e-9, "{st:?}");
            assert!((st.v - v).norm() < 1e-9);
        }
        // join continuity
        let join = t.segments()[0].state_at(1.6);
        let next = t.segments()[1].state_at(1.6);
        assert!((join.p - next.p).norm() <= 1e-9);
        assert!((join.v - next.v).norm() <= 1e-9);
    }

    #[test]
    fn discontinuous_chain_rejected() {
        let s0 = UavState::at_rest(0.0, Vec3::zeros());
        let s1 = UavState::at_rest(0.5, Vec3::new(1.0, 0.0, 0.0));
        let err = Trajectory::new(vec![prim(s0, Vec3::zeros(), 0.5), prim(s1, Vec3::zeros(), 0.5)])
            .unwrap_err();
        assert!(matches!(err, CoreError::Discontinuity { .. }));
    }

    #[test]
    fn quintic_meets_boundary_conditions() {
        let from = UavState {
            t: 2.0,
            p: Vec3::new(0.0, 0.0, 1.0),
            v: Vec3::new(1.0, -0.5, 0.0),
            a: Vec3::new(2.0, 0.0, -2.0),
        };
        let goal = Vec3::new(5.0, 1.0, 1.5);
        let seg = PolynomialSegment::connect(&from, goal, Vec3::zeros(), Vec3::zeros(), 3.7).unwrap();
        let s0 = seg.state_at_local(0.0);
        let s1 = seg.state_at_local(3.7);
        assert!((s0.p - from.p).norm() < 1e-12);
        assert!((s0.v - from.v).norm() < 1e-12);
        assert!((s0.a - from.a).norm() < 1e-12);
        assert!((s1.p - goal).norm() < 1e-9);
        assert!(s1.v.norm() < 1e-9);
        assert!(s1.a.norm() < 1e-9);
    }

    #[test]
    fn quintic_effort_matches_quadrature() {
        let from = UavState {
            t: 0.0,
            p: Vec3::zeros(),
            v: Vec3::new(1.0, 0.2, 0.0),
            a: Vec3::new(0.0, 1.0, 0.0),
        };
        let seg =
            PolynomialSegment::connect(&from, Vec3::new(4.0, 2.0, -1.0), Vec3::zeros(), Vec3::zeros(), 2.5).unwrap();
        // composite Simpson, 2000 panels
        let n = 2000;
        let h = 2.5 / n as f64;
        let f = |s: f64| seg.state_at_local(s).a.norm_squared();
        let mut acc = f(0.0) + f(2.5);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let quad = acc * h / 3.0;
        assert!((seg.effort() - quad).abs() < 1e-8 * quad.max(1.0));
    }

    #[test]
    fn window_preserves_states() {
        let s0 = UavState::at_rest(0.0, Vec3::zeros());
        let u = Vec3::new(2.0, 0.0, 0.0);
        let s1 = propagate(&s0, &u, 0.6).unwrap();
        let poly = PolynomialSegment::connect(&s1, Vec3::new(3.0, 0.0, 0.0), Vec3::zeros(), Vec3::zeros(), 2.0).unwrap();
        let t = Trajectory::new(vec![prim(s0, u, 0.6), Segment::Polynomial(poly)]).unwrap();
        let w = t.window(0.3, 1.7).unwrap();
        assert!((w.t0() - 0.3).abs() < 1e-12);
        assert!((w.end_time() - 1.7).abs() < 1e-12);
        for k in 0..=28 {
            let time = 0.3 + k as f64 * 0.05;
            let a = t.state_at(time);
            let b = w.state_at(time);
            assert!((a.p - b.p).norm() < 1e-9);
            assert!((a.v - b.v).norm() < 1e-9);
        }
    }
}
