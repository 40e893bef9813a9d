//! Simulator experiments.
//!
//! The turning-angle comparison draws the turning-curve fixture with and
//! without curve optimization at several brush descents and compares how
//! faithfully the simulated strokes keep the six corner angles. The style
//! sweep varies dip depth and dip time and records how the Noutan and Kasure
//! degrees and the deposited ink respond.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::editor::StyleHint;
use crate::fixtures;
use crate::geom::{bounds2, polyline_length, resample_polyline, Vec2};
use crate::mapping::{CalibrationModel, MappedPoint, MappedStroke, WorkspaceFrame};
use crate::optimize::sdm::{arc_length_weights, initial_fit};
use crate::optimize::{fit_sdm, resample_even, BSplineCurve, FitConfig, OptimizeError};
use crate::pipeline::simulate;
use crate::sim::metric::nearest_indices;
use crate::sim::{extract_drawn_centerline, turning_point_metric, SimConfig, SimError, TurningPointMetric};
use crate::styles::{plan_styles, StyleError, StyleKind, StyleParams};
use crate::trajectory::{compile_program, ArmModel, TrajectoryError};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AngleExperiment {
    /// Constant brush descents (mm) to draw at.
    pub descents: Vec<f64>,
    /// Fixture sample spacing, mm.
    pub spacing: f64,
    pub window: usize,
    pub fit: FitConfig,
    pub style: StyleParams,
    pub sim: SimConfig,
}

impl Default for AngleExperiment {
    fn default() -> Self {
        Self {
            descents: vec![3.0, 4.0, 5.0, 6.0, 7.0],
            spacing: 2.0,
            window: crate::sim::metric::DEFAULT_WINDOW,
            fit: FitConfig::default(),
            style: StyleParams { lambda: 1.0, t_dip: 5.0, ..StyleParams::default() },
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DescentComparison {
    pub descent: f64,
    pub unoptimized: TurningPointMetric,
    pub optimized: TurningPointMetric,
}

impl DescentComparison {
    pub fn optimized_wins(&self) -> bool {
        self.optimized.mean_abs_error <= self.unoptimized.mean_abs_error
    }
}

/// Places fixture coordinates on the paper: the longer extent runs along
/// robot y, centered on the frame.
fn placement(points: &[Vec2], frame: &WorkspaceFrame) -> impl Fn(Vec2) -> Vec2 {
    let (lo, hi) = bounds2(points.iter().copied()).unwrap_or((Vec2::zeros(), Vec2::zeros()));
    let mid = (lo + hi) / 2.0;
    let c = frame.center;
    move |p: Vec2| Vec2::new(c[0] + (p.y - mid.y), c[1] + (p.x - mid.x))
}

/// Draws `curve` at a constant descent and measures the six turning angles
/// on the simulated stroke.
pub fn draw_and_measure(
    curve: &BSplineCurve,
    vertices: &[Vec2],
    descent: f64,
    place: &dyn Fn(Vec2) -> Vec2,
    exp: &AngleExperiment,
    frame: &WorkspaceFrame,
    arm: &ArmModel,
    model: &CalibrationModel,
) -> Result<TurningPointMetric, EvaluationError> {
    let n = ((curve.arc_length() / exp.spacing).ceil() as usize).max(2);
    let points = resample_even(curve, n + 1)
        .into_iter()
        .map(|p| {
            let q = place(p);
            MappedPoint { x: q.x, y: q.y, thickness: model.descent_to_thickness(descent), descent, clamped: false }
        })
        .collect();
    let stroke = MappedStroke { stroke_id: 1, style_hint: StyleHint::Plain, points };
    let style = StyleParams { style: StyleKind::Plain, ..exp.style };
    let styles = plan_styles(std::slice::from_ref(&stroke), frame, &style)?;
    let program = compile_program(std::slice::from_ref(&stroke), &styles, arm, frame)?;
    let canvas = simulate(&program, frame, model, &style, &exp.sim)?;
    let start = stroke.points.first().map(|p| Vec2::new(p.x, p.y));
    let drawn = extract_drawn_centerline(&canvas, start)?;
    let count = ((polyline_length(&drawn) / exp.spacing).round() as usize).max(2) + 1;
    let samples = resample_polyline(&drawn, count);
    let targets: Vec<Vec2> = vertices.iter().map(|&v| place(v)).collect();
    let idx = nearest_indices(&samples, &targets);
    Ok(turning_point_metric(&samples, &idx, &fixtures::TURNING_ANGLES, exp.window)?)
}

/// Runs the comparison at every configured descent. The unoptimized curve is
/// the chord-length least-squares fit that seeds the optimizer.
pub fn angle_benefit(
    exp: &AngleExperiment,
    frame: &WorkspaceFrame,
    arm: &ArmModel,
    model: &CalibrationModel,
) -> Result<Vec<DescentComparison>, EvaluationError> {
    let (samples, corners) = fixtures::turning_samples(exp.spacing);
    let vertices: Vec<Vec2> = corners.iter().map(|&i| samples[i]).collect();
    let (alpha, beta) = arc_length_weights(&samples, &exp.fit);
    let m = exp.fit.control_count(samples.len());
    let plain = initial_fit(&samples, m, alpha, beta)?;
    let optimized = fit_sdm(&samples, &exp.fit)?.curve;
    let place = placement(&samples, frame);
    exp.descents
        .iter()
        .map(|&d| {
            Ok(DescentComparison {
                descent: d,
                unoptimized: draw_and_measure(&plain, &vertices, d, &place, exp, frame, arm, model)?,
                optimized: draw_and_measure(&optimized, &vertices, d, &place, exp, frame, arm, model)?,
            })
        })
        .collect()
}

/// One (lambda, dip time) cell of the style sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepPoint {
    pub lambda: f64,
    pub t_dip: f64,
    pub noutan: f64,
    pub kasure: f64,
    /// Fraction of the stroke's length that received any ink.
    pub inked_fraction: f64,
    /// Mean density over inked pixels.
    pub mean_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StyleSweep {
    pub descent: f64,
    pub length: f64,
    pub points: Vec<SweepPoint>,
    /// Noutan degree and mean density rise, Kasure degree falls, along both
    /// axes.
    pub noutan_monotone: bool,
    pub kasure_monotone: bool,
    pub density_monotone: bool,
    /// Inked fraction never drops along either axis.
    pub coverage_monotone: bool,
}

/// Draws one straight Noutan stroke along robot y for every combination and
/// records the model degrees next to what the simulator deposited.
pub fn style_sweep(
    lambdas: &[f64],
    dips: &[f64],
    length: f64,
    descent: f64,
    base: &StyleParams,
    frame: &WorkspaceFrame,
    arm: &ArmModel,
    model: &CalibrationModel,
    sim: &SimConfig,
) -> Result<StyleSweep, EvaluationError> {
    let n = ((length / 2.0).ceil() as usize).max(1) + 1;
    let x = frame.center[0];
    let y0 = frame.center[1] - length / 2.0;
    let stroke = MappedStroke {
        stroke_id: 1,
        style_hint: StyleHint::Noutan,
        points: (0..n)
            .map(|i| {
                let y = y0 + length * i as f64 / (n - 1) as f64;
                MappedPoint { x, y, thickness: model.descent_to_thickness(descent), descent, clamped: false }
            })
            .collect(),
    };
    let mut points = Vec::with_capacity(lambdas.len() * dips.len());
    for &lambda in lambdas {
        for &t_dip in dips {
            let style = StyleParams { lambda, t_dip, style: StyleKind::Noutan, ..*base };
            let styles = plan_styles(std::slice::from_ref(&stroke), frame, &style)?;
            let program = compile_program(std::slice::from_ref(&stroke), &styles, arm, frame)?;
            let canvas = simulate(&program, frame, model, &style, sim)?;
            let (c0, c1) = (canvas.to_px(Vec2::new(x, y0)).x as usize, canvas.to_px(Vec2::new(x, y0 + length)).x as usize);
            let inked = (c0..=c1).filter(|&c| (0..canvas.height).any(|r| canvas.get(c, r) > 0.0)).count();
            let (sum, count) = canvas.density.iter().filter(|&&d| d > 0.0).fold((0.0, 0usize), |(s, k), &d| (s + d as f64, k + 1));
            points.push(SweepPoint {
                lambda,
                t_dip,
                noutan: styles[0].noutan,
                kasure: styles[0].kasure.value,
                inked_fraction: inked as f64 / (c1 - c0 + 1) as f64,
                mean_density: if count > 0 { sum / count as f64 } else { 0.0 },
            });
        }
    }
    let cols = dips.len();
    let monotone = |f: &dyn Fn(&SweepPoint, &SweepPoint) -> bool| {
        (0..points.len()).all(|k| {
            let (i, j) = (k / cols, k % cols);
            (i == 0 || f(&points[k - cols], &points[k])) && (j == 0 || f(&points[k - 1], &points[k]))
        })
    };
    Ok(StyleSweep {
        descent,
        length,
        noutan_monotone: monotone(&|a, b| b.noutan > a.noutan),
        kasure_monotone: monotone(&|a, b| b.kasure < a.kasure),
        density_monotone: monotone(&|a, b| b.mean_density > a.mean_density),
        coverage_monotone: monotone(&|a, b| b.inked_fraction >= a.inked_fraction),
        points,
    })
}
