//! Bundled data: the thickness/descent calibration table, the curves used
//! to check fitting and drawing, and the low-poly teapot.

use crate::geom::Vec2;
use crate::mapping::CalibrationTable;
use crate::mesh::{self, TriangleMesh};

/// Measured stroke thickness at nine brush descents (mm).
pub const TABLE_I_CSV: &str = "\
descent_mm,thickness_mm
2,3
4,4
6,5
8,6.5
10,10.5
12,12
14,13
16,14
18,14.5
";

pub fn table_i() -> CalibrationTable {
    CalibrationTable::from_csv(TABLE_I_CSV.as_bytes()).expect("bundled table is valid")
}

/// A hand-digitized-looking S stroke in pixels: one sine period with
/// sub-pixel jitter, 60 points.
pub fn s_curve() -> Vec<Vec2> {
    (0..60)
        .map(|i| {
            let t = i as f64 / 59.0;
            let a = (t - 0.5) * std::f64::consts::TAU;
            let jx = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
            let jy = ((i * 104_729) % 11) as f64 / 11.0 - 0.5;
            Vec2::new(150.0 + 90.0 * a.sin() + jx, 40.0 + 300.0 * t + jy)
        })
        .collect()
}

/// Interior angles (degrees) at the six turning points of [`turning_curve`].
pub const TURNING_ANGLES: [f64; 6] = [135.0, 93.0, 130.0, 81.0, 148.0, 150.0];

/// Polyline (mm) whose six interior vertices have the angles in
/// [`TURNING_ANGLES`]; straight runs are long enough for a 10 mm window.
pub fn turning_curve() -> Vec<Vec2> {
    const TURN_LEFT: [bool; 6] = [true, true, false, false, true, true];
    const RUNS: [f64; 7] = [22.0, 21.0, 22.0, 24.0, 22.0, 21.0, 22.0];
    let mut p = Vec2::zeros();
    let mut heading = 0.0f64;
    let mut out = vec![p];
    for (i, run) in RUNS.iter().enumerate() {
        if i > 0 {
            let turn = (180.0 - TURNING_ANGLES[i - 1]).to_radians();
            heading += if TURN_LEFT[i - 1] { turn } else { -turn };
        }
        p += Vec2::new(heading.cos(), heading.sin()) * *run;
        out.push(p);
    }
    out
}

/// [`turning_curve`] split into near-equal pieces of about `spacing` mm per
/// run, so every vertex is a sample; returns the samples and the indices of
/// the six turning points.
pub fn turning_samples(spacing: f64) -> (Vec<Vec2>, Vec<usize>) {
    let c = turning_curve();
    let mut out = vec![c[0]];
    let mut corners = Vec::new();
    for (i, w) in c.windows(2).enumerate() {
        if i > 0 {
            corners.push(out.len() - 1);
        }
        let n = ((w[1] - w[0]).norm() / spacing).round().max(1.0) as usize;
        out.extend((1..=n).map(|k| w[0] + (w[1] - w[0]) * (k as f64 / n as f64)));
    }
    (out, corners)
}

pub fn teapot() -> TriangleMesh {
    mesh::teapot()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::metric::{angle_of_contingence, nearest_indices};

    #[test]
    fn turning_curve_angles() {
        let c = turning_curve();
        let (samples, idx) = turning_samples(2.0);
        assert_eq!(nearest_indices(&samples, &c[1..7]), idx);
        for (k, want) in idx.iter().zip(TURNING_ANGLES) {
            let (got, _) = angle_of_contingence(&samples, *k, 5).unwrap();
            assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn table_parses() {
        assert_eq!(table_i().rows.len(), 9);
        assert_eq!(s_curve().len(), 60);
    }
}
