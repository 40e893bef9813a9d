//! Trapezoidal velocity profiles.

use serde::{Deserialize, Serialize};

/// Accelerate at `accel`, cruise at `v_peak`, decelerate symmetrically.
/// A triangular profile has `t_cruise == 0` and `v_peak` below the request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrapezoidProfile {
    pub length: f64,
    pub v_peak: f64,
    pub accel: f64,
    pub t_accel: f64,
    pub t_cruise: f64,
}

impl TrapezoidProfile {
    /// `None` for a zero-length move.
    pub fn plan(length: f64, v: f64, a: f64) -> Option<Self> {
        assert!(v > 0.0 && a > 0.0);
        if !(length > 0.0) {
            return None;
        }
        if length <= v * v / a {
            let v_peak = (length * a).sqrt();
            Some(Self { length, v_peak, accel: a, t_accel: v_peak / a, t_cruise: 0.0 })
        } else {
            let t_accel = v / a;
            Some(Self { length, v_peak: v, accel: a, t_accel, t_cruise: (length - v * t_accel) / v })
        }
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.t_accel + self.t_cruise
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        let ramp_down = self.t_accel + self.t_cruise;
        if t < self.t_accel {
            self.accel * t
        } else if t <= ramp_down {
            self.v_peak
        } else {
            (self.v_peak - self.accel * (t - ramp_down)).max(0.0)
        }
    }

    /// Distance covered after `t` seconds.
    pub fn distance_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        let d_acc = 0.5 * self.accel * self.t_accel * self.t_accel;
        let ramp_down = self.t_accel + self.t_cruise;
        if t < self.t_accel {
            0.5 * self.accel * t * t
        } else if t <= ramp_down {
            d_acc + self.v_peak * (t - self.t_accel)
        } else {
            let u = t - ramp_down;
            d_acc + self.v_peak * self.t_cruise + self.v_peak * u - 0.5 * self.accel * u * u
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_example() {
        let p = TrapezoidProfile::plan(100.0, 100.0, 500.0).unwrap();
        assert!((p.t_accel - 0.2).abs() < 1e-12);
        assert!((p.t_cruise - 0.8).abs() < 1e-12);
        assert!((p.duration() - 1.2).abs() < 1e-12);
        assert!((p.distance_at(p.duration()) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn triangular_boundary_and_empty() {
        let p = TrapezoidProfile::plan(20.0, 100.0, 500.0).unwrap();
        assert_eq!(p.t_cruise, 0.0);
        assert!((p.v_peak - 100.0).abs() < 1e-9);
        let q = TrapezoidProfile::plan(5.0, 100.0, 500.0).unwrap();
        assert!(q.v_peak < 100.0 && (q.distance_at(q.duration()) - 5.0).abs() < 1e-9);
        assert!(TrapezoidProfile::plan(0.0, 100.0, 500.0).is_none());
    }
}
