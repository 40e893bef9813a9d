//! Base-rotation plus planar two-link arm with a vertical tool.

use serde::{Deserialize, Serialize};

use super::TrajectoryError;
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JointPose {
    pub base: f64,
    pub shoulder: f64,
    pub elbow: f64,
    pub wrist: f64,
}

impl JointPose {
    pub fn as_array(&self) -> [f64; 4] {
        [self.base, self.shoulder, self.elbow, self.wrist]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { base: a[0], shoulder: a[1], elbow: a[2], wrist: a[3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ArmModel {
    pub l1: f64,
    pub l2: f64,
    pub base_height: f64,
    /// `[min, max]` degrees for base, shoulder, elbow, wrist.
    pub limits: [[f64; 2]; 4],
    /// mm/s, bound for every segment.
    pub v_max: f64,
    /// mm/s^2.
    pub a_max: f64,
    /// Cruise speed while drawing, mm/s.
    pub draw_speed: f64,
    /// Cruise speed for travel and brush preparation, mm/s.
    pub travel_speed: f64,
}

pub const DRAW_SPEED_RANGE: [f64; 2] = [50.0, 120.0];

impl Default for ArmModel {
    fn default() -> Self {
        Self {
            l1: 135.0,
            l2: 147.0,
            base_height: 0.0,
            limits: [[-135.0, 135.0], [-45.0, 135.0], [-170.0, 0.0], [-150.0, 150.0]],
            v_max: 200.0,
            a_max: 500.0,
            draw_speed: 80.0,
            travel_speed: 150.0,
        }
    }
}

impl ArmModel {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let bad = |m: &str| Err(TrajectoryError::Arm(m.into()));
        if !(self.l1 > 0.0 && self.l2 > 0.0) {
            return bad("link lengths must be > 0");
        }
        if self.limits.iter().any(|l| !(l[0] <= l[1])) {
            return bad("joint limits must be ordered");
        }
        if !(self.a_max > 0.0 && self.v_max > 0.0 && self.travel_speed > 0.0 && self.travel_speed <= self.v_max) {
            return bad("speeds and acceleration must be positive and within vMax");
        }
        if !(self.draw_speed >= DRAW_SPEED_RANGE[0] && self.draw_speed <= DRAW_SPEED_RANGE[1] && self.draw_speed <= self.v_max) {
            return bad("draw speed must be within 50..=120 mm/s");
        }
        Ok(())
    }

    pub fn forward(&self, j: &JointPose) -> Vec3 {
        let (t0, t1, t12) = (j.base.to_radians(), j.shoulder.to_radians(), (j.shoulder + j.elbow).to_radians());
        let r = self.l1 * t1.cos() + self.l2 * t12.cos();
        let z = self.base_height + self.l1 * t1.sin() + self.l2 * t12.sin();
        Vec3::new(r * t0.cos(), r * t0.sin(), z)
    }

    /// Partial derivatives of the tool position per degree of each joint;
    /// column `k` belongs to joint `k`.
    pub fn jacobian(&self, j: &JointPose) -> [Vec3; 4] {
        let (t0, t1, t12) = (j.base.to_radians(), j.shoulder.to_radians(), (j.shoulder + j.elbow).to_radians());
        let r = self.l1 * t1.cos() + self.l2 * t12.cos();
        let dr1 = -self.l1 * t1.sin() - self.l2 * t12.sin();
        let dz1 = self.l1 * t1.cos() + self.l2 * t12.cos();
        let dr2 = -self.l2 * t12.sin();
        let dz2 = self.l2 * t12.cos();
        let d = std::f64::consts::PI / 180.0;
        let (c, s) = (t0.cos(), t0.sin());
        [
            Vec3::new(-r * s, r * c, 0.0) * d,
            Vec3::new(dr1 * c, dr1 * s, dz1) * d,
            Vec3::new(dr2 * c, dr2 * s, dz2) * d,
            Vec3::zeros(),
        ]
    }

    pub fn within_limits(&self, j: &JointPose) -> Result<(), TrajectoryError> {
        const NAMES: [&str; 4] = ["base", "shoulder", "elbow", "wrist"];
        for (k, v) in j.as_array().into_iter().enumerate() {
            let [lo, hi] = self.limits[k];
            if v < lo - 1e-9 || v > hi + 1e-9 {
                return Err(TrajectoryError::JointLimit { joint: NAMES[k], angle: v });
            }
        }
        Ok(())
    }

    /// Elbow-up solution. The base either faces the target or faces away
    /// with the arm reaching back over it; the candidate within limits
    /// nearest the previous base angle wins. On the base axis, where the
    /// base angle is free, the previous pose's base angle is kept.
    pub fn inverse(&self, p: Vec3, prev: Option<&JointPose>) -> Result<JointPose, TrajectoryError> {
        let r = p.x.hypot(p.y);
        let z = p.z - self.base_height;
        let dist = r.hypot(z);
        let (lo, hi) = ((self.l1 - self.l2).abs(), self.l1 + self.l2);
        let tol = 1e-9 * hi;
        if dist > hi + tol || dist < lo - tol {
            return Err(TrajectoryError::Unreachable { point: [p.x, p.y, p.z], distance: dist, reach: [lo, hi] });
        }
        let cos2 = ((dist * dist - self.l1 * self.l1 - self.l2 * self.l2) / (2.0 * self.l1 * self.l2)).clamp(-1.0, 1.0);
        let t2 = -cos2.acos();
        let wrist = prev.map_or(0.0, |j| j.wrist);
        let solve = |base: f64, reach: f64| {
            let t1 = z.atan2(reach) - (self.l2 * t2.sin()).atan2(self.l1 + self.l2 * t2.cos());
            JointPose { base, shoulder: t1.to_degrees(), elbow: t2.to_degrees(), wrist }
        };
        let candidates = if r < 1e-12 {
            vec![solve(prev.map_or(0.0, |j| j.base), 0.0)]
        } else {
            let az = p.y.atan2(p.x).to_degrees();
            let back = if az > 0.0 { az - 180.0 } else { az + 180.0 };
            vec![solve(az, r), solve(back, -r)]
        };
        let target = prev.map_or(0.0, |j| j.base);
        let mut first_err = None;
        let mut best: Option<JointPose> = None;
        for c in candidates {
            match self.within_limits(&c) {
                Ok(()) if best.is_none_or(|b| (c.base - target).abs() < (b.base - target).abs()) => best = Some(c),
                Ok(()) => {}
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        best.ok_or_else(|| first_err.expect("at least one candidate"))
    }
}
