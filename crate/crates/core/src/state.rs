//! Flat quadrotor states under double-integrator dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, CoreError, Result};
use crate::geometry::Vec3;

/// Position, velocity and acceleration at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub t: f64,
    pub p: Vec3,
    pub v: Vec3,
    pub a: Vec3,
}

impl UavState {
    pub fn at_rest(t: f64, p: Vec3) -> Self {
        Self {
            t,
            p,
            v: Vec3::zeros(),
            a: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.p.iter().all(|c| c.is_finite())
            && self.v.iter().all(|c| c.is_finite())
            && self.a.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinodynamicLimits {
    /// m/s
    pub v_max: f64,
    /// m/s², per axis
    pub a_max: f64,
    /// Motion primitive duration, seconds.
    pub primitive_duration: f64,
}

impl Default for KinodynamicLimits {
    fn default() -> Self {
        Self {
            v_max: 2.0,
            a_max: 2.0,
            primitive_duration: 0.6,
        }
    }
}

impl KinodynamicLimits {
    pub fn validate(&self) -> Result<()> {
        ensure_finite(
            "kinodynamic limits",
            &[self.v_max, self.a_max, self.primitive_duration],
        )?;
        if self.v_max <= 0.0 || self.a_max <= 0.0 || self.primitive_duration <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "kinodynamic limits must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Closed-form double-integrator propagation under constant control `u`.
pub fn propagate(s: &UavState, u: &Vec3, tau: f64) -> Result<UavState> {
    if !s.is_finite() || !u.iter().all(|c| c.is_finite()) || !tau.is_finite() {
        return Err(CoreError::InvalidArgument(
            "propagate: non-finite input".into(),
        ));
    }
    if tau < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "propagate: negative duration {tau}"
        )));
    }
    if tau == 0.0 {
        return Ok(*s);
    }
    Ok(propagate_unchecked(s, u, tau))
}

#[inline]
pub(crate) fn propagate_unchecked(s: &UavState, u: &Vec3, tau: f64) -> UavState {
    UavState {
        t: s.t + tau,
        p: s.p + s.v * tau + u * (0.5 * tau * tau),
        v: s.v + u * tau,
        a: *u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Fixed-step RK4 on (p, v) with p' = v, v' = u.
    fn rk4(s: &UavState, u: &Vec3, tau: f64, dt: f64) -> (Vec3, Vec3) {
        let steps = (tau / dt).round() as usize;
        let h = tau / steps as f64;
        let (mut p, mut v) = (s.p, s.v);
        for _ in 0..steps {
            let k1p = v;
            let k1v = *u;
            let k2p = v + k1v * (h / 2.0);
            let k2v = *u;
            let k3p = v + k2v * (h / 2.0);
            let k3v = *u;
            let k4p = v + k3v * h;
            let k4v = *u;
            p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        }
        (p, v)
    }

    #[test]
    fn zero_control() {
        let s = UavState {
            t: 0.0,
            p: Vec3::zeros(),
            v: Vec3::new(1.0, 0.0, 0.0),
            a: Vec3::zeros(),
        };
        let out = propagate(&s, &Vec3::zeros(), 0.6).unwrap();
        assert!((out.p - Vec3::new(0.6, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(out.v, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(out.t, 0.6);
    }

    #[test]
    fn full_throttle_from_rest_matches_rk4() {
        let s = UavState::at_rest(0.0, Vec3::zeros());
        let u = Vec3::new(2.0, 0.0, 0.0);
        let out = propagate(&s, &u, 0.6).unwrap();
        let (p_ref, v_ref) = rk4(&s, &u, 0.6, 1e-4);
        assert!((out.p - p_ref).norm() <= 1e-9);
        assert!((out.v - v_ref).norm() <= 1e-9);
        // frozen from the RK4 oracle
        assert!((out.p - Vec3::new(0.36, 0.0, 0.0)).norm() <= 1e-12);
        assert!((out.v - Vec3::new(1.2, 0.0, 0.0)).norm() <= 1e-12);
        assert_eq!(out.a, u);
    }

    #[test]
    fn zero_duration_is_identity() {
        let s = UavState {
            t: 3.0,
            p: Vec3::new(1.0, 2.0, 3.0),
            v: Vec3::new(-1.0, 0.5, 0.0),
            a: Vec3::new(0.3, 0.0, -2.0),
        };
        assert_eq!(propagate(&s, &Vec3::new(2.0, 2.0, 2.0), 0.0).unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        let s = UavState::at_rest(0.0, Vec3::zeros());
        assert!(propagate(&s, &Vec3::new(f64::NAN, 0.0, 0.0), 0.1).is_err());
        assert!(propagate(&s, &Vec3::zeros(), f64::INFINITY).is_err());
        assert!(propagate(&s, &Vec3::zeros(), -0.1).is_err());
        let mut bad = s;
        bad.p.y = f64::INFINITY;
        assert!(propagate(&bad, &Vec3::zeros(), 0.1).is_err());
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn time_additive(p in vec3(), v in vec3(), u in vec3(), t1 in 0.0..2.0f64, t2 in 0.0..2.0f64) {
            let s = UavState { t: 0.0, p, v, a: Vec3::zeros() };
            let two_step = propagate(&propagate(&s, &u, t1).unwrap(), &u, t2).unwrap();
            let one_step = propagate(&s, &u, t1 + t2).unwrap();
            prop_assert!((two_step.p - one_step.p).norm() <= 1e-9);
            prop_assert!((two_step.v - one_step.v).norm() <= 1e-9);
        }

        #[test]
        fn agrees_with_rk4(p in vec3(), v in vec3(), u in vec3(), tau in 0.01..1.0f64) {
            let s = UavState { t: 0.0, p, v, a: Vec3::zeros() };
            let out = propagate(&s, &u, tau).unwrap();
            let (p_ref, v_ref) = rk4(&s, &u, tau, 1e-3);
            prop_assert!((out.p - p_ref).norm() <= 1e-9);
            prop_assert!((out.v - v_ref).norm() <= 1e-9);
        }
    }
}
