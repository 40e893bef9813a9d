//! Stroke optimization: SDM B-spline fitting, even resampling and the
//! thickness profile.

pub mod bspline;
pub mod sdm;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bspline::BSplineCurve;
pub use sdm::{fit_sdm, initial_fit, FitConfig, FitReport};

use crate::editor::{EditableStroke, StyleHint};
use crate::geom::{polyline_length, resample_polyline, Vec2};
use crate::par::{map_slice, Execution};

pub const DEFAULT_GAMMA: f64 = 0.6;
/// Target sample spacing along the fitted curve, px.
pub const SAMPLE_SPACING: f64 = 2.0;
pub const MIN_SAMPLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("fewer than 4 distinct input points")]
    Degenerate,
    #[error("invalid fit config: {0}")]
    InvalidConfig(String),
    #[error("invalid thickness range {t_min}..{t_max}")]
    Thickness { t_min: f64, t_max: f64 },
    #[error("stroke {id}: {source}")]
    Stroke { id: u64, source: Box<OptimizeError> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizedStroke {
    pub stroke_id: u64,
    pub curve: BSplineCurve,
    pub samples: Vec<Vec2>,
    /// Per-sample thickness, px.
    pub thickness: Vec<f64>,
    pub style_hint: StyleHint,
    pub objective: Vec<f64>,
    pub max_distance: f64,
}

/// `n` points at equal arc-length spacing, first and last at the curve ends.
pub fn resample_even(curve: &BSplineCurve, n: usize) -> Vec<Vec2> {
    assert!(n >= 2);
    // dense arc-length table, inverted by linear interpolation
    let dense = 256 * curve.spans();
    let ts: Vec<f64> = (0..=dense).map(|i| i as f64 / dense as f64).collect();
    let pts: Vec<Vec2> = ts.iter().map(|&t| curve.eval(t)).collect();
    let mut cum = vec![0.0; pts.len()];
    for i in 1..pts.len() {
        cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
    }
    let total = cum[dense];
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        if k == 0 {
            out.push(pts[0]);
            continue;
        }
        if k == n - 1 {
            out.push(pts[dense]);
            continue;
        }
        let s = total * k as f64 / (n - 1) as f64;
        while j + 1 < dense && cum[j + 1] < s {
            j += 1;
        }
        let span = cum[j + 1] - cum[j];
        let f = if span > 0.0 { (s - cum[j]) / span } else { 0.0 };
        out.push(curve.eval(ts[j] + f * (ts[j + 1] - ts[j])));
    }
    out
}

/// Thickness rising from `t_min` at both ends to `t_max` at the middle:
/// with `r = 2 min(i, n - i) / n`, `t_i = (1 - r^gamma) t_min + r^gamma t_max`.
pub fn assign_thickness(count: usize, t_min: f64, t_max: f64, gamma: f64) -> Result<Vec<f64>, OptimizeError> {
    if !(t_min > 0.0 && t_min <= t_max && t_max.is_finite()) {
        return Err(OptimizeError::Thickness { t_min, t_max });
    }
    assert!(count >= 2);
    let n = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let j = i.min(count - 1 - i) as f64;
            let r = (2.0 * j / n).min(1.0).powf(gamma);
            (1.0 - r) * t_min + r * t_max
        })
        .collect())
}

/// Points ready for fitting: short or sparse strokes (e.g. a two-click
/// insert) are densified along their polyline.
fn fit_input(points: &[Vec2]) -> Vec<Vec2> {
    if points.len() >= 8 || polyline_length(points) <= 0.0 {
        points.to_vec()
    } else {
        resample_polyline(points, 8)
    }
}

pub fn optimize_stroke(stroke: &EditableStroke, cfg: &FitConfig, t_min: f64, t_max: f64) -> Result<OptimizedStroke, OptimizeError> {
    let wrap = |e: OptimizeError| OptimizeError::Stroke { id: stroke.id, source: Box::new(e) };
    let input = fit_input(&stroke.points);
    let report = fit_sdm(&input, cfg).map_err(wrap)?;
    let n = ((report.curve.arc_length() / SAMPLE_SPACING).ceil() as usize).max(MIN_SAMPLES);
    let samples = resample_even(&report.curve, n);
    let thickness = assign_thickness(n, t_min, t_max, DEFAULT_GAMMA).map_err(wrap)?;
    Ok(OptimizedStroke {
        stroke_id: stroke.id,
        curve: report.curve,
        samples,
        thickness,
        style_hint: stroke.style_hint,
        objective: report.objective,
        max_distance: report.max_distance,
    })
}

/// Optimizes every stroke independently, in stroke order.
pub fn optimize_strokes(
    strokes: &[EditableStroke],
    cfg: &FitConfig,
    t_min: f64,
    t_max: f64,
    exec: Execution,
) -> Result<Vec<OptimizedStroke>, OptimizeError> {
    cfg.validate()?;
    map_slice(exec, strokes, |s| optimize_stroke(s, cfg, t_min, t_max)).into_iter().collect()
}

/// SVG overlay of input points (grey), control polygon (blue) and the fitted
/// curve (black).
pub fn debug_svg(input: &[Vec2], curve: &BSplineCurve, width: u32, height: u32) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#);
    for p in input {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#999"/>"##, p.x, p.y);
    }
    let path = |pts: &[Vec2]| pts.iter().map(|p| format!("{:.2},{:.2}", p.x, p.y)).collect::<Vec<_>>().join(" ");
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#36c" stroke-dasharray="4 3"/>"##, path(&curve.control_points));
    for p in &curve.control_points {
        let _ = writeln!(s, r##"<rect x="{:.2}" y="{:.2}" width="4" height="4" fill="#36c"/>"##, p.x - 2.0, p.y - 2.0);
    }
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#000" stroke-width="1.2"/>"##, path(&curve.polyline(400)));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_samples_on_a_line() {
        let c = BSplineCurve::new((0..6).map(|i| Vec2::new(20.0 * i as f64, 0.0)).collect());
        let s = resample_even(&c, 5);
        for (k, p) in s.iter().enumerate() {
            assert!((p.x - 25.0 * k as f64).abs() < 0.5);
        }
        let two = resample_even(&c, 2);
        assert_eq!(two, vec![c.eval(0.0), c.eval(1.0)]);
    }

    #[test]
    fn even_samples_on_a_circle() {
        let cps: Vec<Vec2> = (0..13)
            .map(|i| {
                let a = i as f64 / 12.0 * std::f64::consts::TAU;
                Vec2::new(100.0 * a.cos(), 100.0 * a.sin())
            })
            .collect();
        let c = BSplineCurve::new(cps);
        let s = resample_even(&c, 60);
        let chords: Vec<f64> = s.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let mean = chords.iter().sum::<f64>() / chords.len() as f64;
        assert!(chords.iter().all(|c| (c - mean).abs() < 0.02 * mean));
    }

    #[test]
    fn thickness_profile() {
        let t = assign_thickness(101, 4.0, 25.0, 0.6).unwrap();
        assert_eq!(t[0], 4.0);
        assert_eq!(t[100], 4.0);
        assert_eq!(t[50], 25.0);
        assert!((t[25] - 17.86).abs() < 0.01, "{}", t[25]);
        for i in 0..=100 {
            assert_eq!(t[i], t[100 - i]);
        }
        assert!(assign_thickness(10, 0.0, 3.0, 0.6).is_err());
        assert!(assign_thickness(10, 5.0, 3.0, 0.6).is_err());
    }

    #[test]
    fn two_point_insert_is_optimized() {
        let s = EditableStroke {
            id: 3,
            points: vec![Vec2::new(10.0, 10.0), Vec2::new(110.0, 60.0)],
            source: crate::editor::StrokeSource::Inserted,
            style_hint: StyleHint::Plain,
            candidate: None,
            stale: false,
        };
        let o = optimize_stroke(&s, &FitConfig::default(), 4.0, 25.0).unwrap();
        assert!(o.samples.len() >= MIN_SAMPLES);
        assert!((o.samples[0] - Vec2::new(10.0, 10.0)).norm() < 1e-3);
        assert!(debug_svg(&s.points, &o.curve, 200, 100).contains("<polyline"));
    }
}
