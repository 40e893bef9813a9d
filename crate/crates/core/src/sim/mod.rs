//! Virtual brush and rice-paper canvas that execute a robot program.
//!
//! The brush is a set of concentric bristle rings, each with its own ink
//! reservoir and its own (seeded) consumption rate, so rings run dry at
//! different times and leave streaks. Footprints are discs whose diameter
//! follows the inverse calibration line; the contact point trails the
//! robot position by a lag that grows with the descent (bristle bending).

pub mod metric;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metric::{angle_of_contingence, extract_drawn_centerline, turning_point_metric, TurningPointMetric};

use crate::geom::{Vec2, Vec3};
use crate::imageio::{encode_gray_png, ImageIoError};
use crate::mapping::{CalibrationModel, WorkspaceFrame};
use crate::styles::{BrushAction, InkStone, StyleParams};
use crate::trajectory::{RobotProgram, SegmentKind};

pub const RINGS: usize = 8;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("segment {segment} reaches ({x:.2}, {y:.2}) mm, outside the canvas")]
    OffCanvas { segment: usize, x: f64, y: f64 },
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("canvas has no ink")]
    EmptyCanvas,
    #[error("canvas holds {0} separate strokes")]
    MultipleStrokes(usize),
    #[error("bad turning point index {0}")]
    TurningPoint(usize),
    #[error(transparent)]
    Image(#[from] ImageIoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SimConfig {
    pub px_per_mm: f64,
    /// Area (mm^2) a full reservoir covers at full density.
    pub capacity: f64,
    /// Reservoir fraction above which a ring deposits at full strength.
    pub saturation: f64,
    /// Fraction of the reservoir a scrape keeps.
    pub scrape_keep: f64,
    /// Darkness of light ink.
    pub light_darkness: f64,
    /// Contact-point lag per mm of descent.
    pub lag_per_descent: f64,
    /// Relative spread of ring consumption rates and ring radii.
    pub jitter: f64,
    /// Stamp spacing, canvas pixels.
    pub stamp_spacing: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            px_per_mm: 10.0,
            capacity: 2800.0,
            saturation: 0.1,
            scrape_keep: 0.75,
            light_darkness: 0.3,
            lag_per_descent: 0.3,
            jitter: 0.3,
            stamp_spacing: 0.5,
            seed: 7,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.into()));
        if !(self.px_per_mm > 0.0 && self.capacity > 0.0 && self.saturation > 0.0) {
            return bad("resolution, capacity and saturation must be > 0");
        }
        if !(0.0..=1.0).contains(&self.scrape_keep) || !(0.0..=1.0).contains(&self.light_darkness) {
            return bad("scrape keep and light darkness must be in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.jitter) || !(self.lag_per_descent >= 0.0) {
            return bad("jitter must be in [0, 1) and lag >= 0");
        }
        if !(self.stamp_spacing > 0.0 && self.stamp_spacing <= 0.5) {
            return bad("stamp spacing must be in (0, 0.5] px");
        }
        Ok(())
    }
}

/// Footprint diameter at `descent` mm below tip contact: the inverse of the
/// calibration line, zero while the brush is above the paper.
pub fn footprint_width(descent: f64, model: &CalibrationModel) -> f64 {
    if descent < 0.0 {
        return 0.0;
    }
    ((descent - model.b) / model.w).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BrushState {
    /// Ink per ring, fraction of a full ring.
    pub reservoir: [f64; RINGS],
    /// Outer radius of each ring as a fraction of the footprint radius.
    pub ring_edges: [f64; RINGS],
    /// Relative consumption rate of each ring.
    pub rates: [f64; RINGS],
    /// Darkness of the ink held, 0 (water) to 1 (thick ink).
    pub darkness: f64,
    pub position: [f64; 3],
    pub descent: f64,
}

impl BrushState {
    /// A dry brush with seeded ring geometry.
    pub fn new(cfg: &SimConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut rates = [1.0; RINGS];
        for r in rates.iter_mut() {
            *r = 1.0 + cfg.jitter * rng.random_range(-1.0..=1.0);
        }
        let mut edges = [0.0; RINGS];
        for (k, e) in edges.iter_mut().enumerate() {
            let nominal = (k + 1) as f64 / RINGS as f64;
            *e = if k + 1 == RINGS { 1.0 } else { nominal + cfg.jitter * 0.5 / RINGS as f64 * rng.random_range(-1.0..=1.0) };
        }
        Self { reservoir: [0.0; RINGS], ring_edges: edges, rates, darkness: 0.0, position: [0.0; 3], descent: 0.0 }
    }

    pub fn mean_reservoir(&self) -> f64 {
        self.reservoir.iter().sum::<f64>() / RINGS as f64
    }

    fn ring_of(&self, frac: f64) -> usize {
        self.ring_edges.iter().position(|&e| frac <= e).unwrap_or(RINGS - 1)
    }

    /// Light soak fills the brush with light ink; a thick dip adds
    /// `lambda (1 - exp(-c3 T))` and darkens a pre-soaked brush by
    /// `lambda (1 - exp(-c1 T))`.
    fn dip(&mut self, stone: InkStone, duration: f64, depth: f64, style: &StyleParams, cfg: &SimConfig) {
        match stone {
            InkStone::Light => {
                self.reservoir = [1.0; RINGS];
                self.darkness = cfg.light_darkness;
            }
            InkStone::Thick => {
                let lambda = (depth / style.l_brush).clamp(0.0, 1.0);
                let fill = lambda * (1.0 - (-style.c3 * duration).exp());
                let soaked = self.mean_reservoir() > 0.0 && self.darkness < 1.0 && self.darkness > 0.0;
                self.darkness = if soaked {
                    let d = lambda * (1.0 - (-style.c1 * duration).exp());
                    (cfg.light_darkness + (1.0 - cfg.light_darkness) * d).min(1.0)
                } else {
                    1.0
                };
                for r in self.reservoir.iter_mut() {
                    *r = (*r + fill).min(1.0);
                }
            }
        }
    }

    fn scrape(&mut self, cfg: &SimConfig) {
        for r in self.reservoir.iter_mut() {
            *r *= cfg.scrape_keep;
        }
    }
}

/// Deposited ink density over the paper rectangle. Column `i` runs along
/// robot y and row `j` along robot x, so the canvas has the orientation of
/// the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct CanvasRaster {
    pub px_per_mm: f64,
    /// Robot-frame mm at the corner of pixel (0, 0).
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
    pub density: Vec<f32>,
}

impl CanvasRaster {
    pub fn for_frame(frame: &WorkspaceFrame, px_per_mm: f64) -> Self {
        let size = frame.paper.size();
        let width = (size.y * px_per_mm).ceil() as usize;
        let height = (size.x * px_per_mm).ceil() as usize;
        Self { px_per_mm, origin: frame.paper.min, width, height, density: vec![0.0; width * height] }
    }

    /// Robot (x, y) to fractional pixel coordinates (column, row).
    pub fn to_px(&self, p: Vec2) -> Vec2 {
        Vec2::new((p.y - self.origin[1]) * self.px_per_mm, (p.x - self.origin[0]) * self.px_per_mm)
    }

    /// Centre of a pixel in robot (x, y).
    pub fn to_mm(&self, col: f64, row: f64) -> Vec2 {
        Vec2::new(self.origin[0] + row / self.px_per_mm, self.origin[1] + col / self.px_per_mm)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let q = self.to_px(p);
        q.x >= 0.0 && q.y >= 0.0 && q.x <= self.width as f64 && q.y <= self.height as f64
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.density[row * self.width + col]
    }

    pub fn total_ink(&self) -> f64 {
        self.density.iter().map(|&d| d as f64).sum::<f64>() / (self.px_per_mm * self.px_per_mm)
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.density.iter().map(|&d| ((1.0 - d.clamp(0.0, 1.0)) * 255.0).round() as u8).collect()
    }

    pub fn to_png(&self) -> Result<Vec<u8>, SimError> {
        Ok(encode_gray_png(self.width as u32, self.height as u32, &self.to_gray8())?)
    }

    /// Raw little-endian densities, for content hashing.
    pub fn density_bytes(&self) -> Vec<u8> {
        self.density.iter().flat_map(|d| d.to_le_bytes()).collect()
    }

    fn stamp(&mut self, center: Vec2, width_mm: f64, brush: &BrushState, cfg: &SimConfig) {
        let r_px = 0.5 * width_mm * self.px_per_mm;
        if r_px <= 0.0 {
            return;
        }
        let c = self.to_px(center);
        let strength: [f32; RINGS] =
            std::array::from_fn(|k| (brush.darkness * (brush.reservoir[k] / cfg.saturation).min(1.0)) as f32);
        let (x0, x1) = ((c.x - r_px).floor().max(0.0) as usize, ((c.x + r_px).ceil() as usize).min(self.width));
        let (y0, y1) = ((c.y - r_px).floor().max(0.0) as usize, ((c.y + r_px).ceil() as usize).min(self.height));
        for row in y0..y1 {
            let dy = row as f64 + 0.5 - c.y;
            for col in x0..x1 {
                let dx = col as f64 + 0.5 - c.x;
                let d = dx.hypot(dy);
                if d > r_px {
                    continue;
                }
                let s = strength[brush.ring_of(d / r_px)];
                let px = &mut self.density[row * self.width + col];
                if s > *px {
                    *px = s;
                }
            }
        }
    }
}

/// Runs every segment of `program`. Dips and scrapes change the brush; draw
/// segments stamp footprints every `stamp_spacing` pixels along the
/// task-space path and drain each ring in proportion to the area swept.
pub fn execute_program(
    program: &RobotProgram,
    brush: &mut BrushState,
    canvas: &mut CanvasRaster,
    frame: &WorkspaceFrame,
    model: &CalibrationModel,
    style: &StyleParams,
    cfg: &SimConfig,
) -> Result<(), SimError> {
    cfg.validate()?;
    for (i, seg) in program.segments.iter().enumerate() {
        if seg.kind == SegmentKind::Draw {
            if let Some(w) = seg.waypoints.iter().find(|w| !canvas.contains(Vec2::new(w[0], w[1]))) {
                return Err(SimError::OffCanvas { segment: i, x: w[0], y: w[1] });
            }
        }
    }
    let step_mm = cfg.stamp_spacing / canvas.px_per_mm;
    for seg in &program.segments {
        match (seg.kind, seg.action) {
            (SegmentKind::Dip, Some(BrushAction::Dip { stone, dip_duration, dip_depth })) => {
                brush.dip(stone, dip_duration, dip_depth, style, cfg);
            }
            (SegmentKind::Scrape, _) => brush.scrape(cfg),
            (SegmentKind::Draw, _) => draw(seg.waypoints.as_slice(), brush, canvas, frame, model, cfg, step_mm),
            _ => {}
        }
        if let Some(last) = seg.waypoints.last() {
            brush.position = *last;
            brush.descent = frame.paper_z - last[2];
        }
    }
    Ok(())
}

fn draw(
    waypoints: &[[f64; 3]],
    brush: &mut BrushState,
    canvas: &mut CanvasRaster,
    frame: &WorkspaceFrame,
    model: &CalibrationModel,
    cfg: &SimConfig,
    step_mm: f64,
) {
    let Some(first) = waypoints.first() else { return };
    let mut contact = Vec2::new(first[0], first[1]);
    let mut stamp_at = |p: Vec3, contact: &mut Vec2, ds: f64, brush: &mut BrushState| {
        let descent = frame.paper_z - p.z;
        let lag = cfg.lag_per_descent * descent.max(0.0);
        *contact += (p.xy() - *contact) * (ds / (lag + ds).max(1e-12));
        let width = footprint_width(descent, model);
        canvas.stamp(*contact, width, brush, cfg);
        let swept = width * ds / cfg.capacity;
        for k in 0..RINGS {
            brush.reservoir[k] = (brush.reservoir[k] - swept * brush.rates[k]).max(0.0);
        }
    };
    stamp_at(Vec3::from(*first), &mut contact, step_mm, brush);
    for w in waypoints.windows(2) {
        let (a, b) = (Vec3::from(w[0]), Vec3::from(w[1]));
        let len = (b - a).xy().norm();
        let n = (len / step_mm).ceil().max(1.0) as usize;
        for k in 1..=n {
            let p = a + (b - a) * (k as f64 / n as f64);
            stamp_at(p, &mut contact, len / n as f64, brush);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editor::StyleHint;
    use crate::mapping::{MappedPoint, MappedStroke};
    use crate::styles::{brush_actions, Dryness, StrokeStyle, StyleKind};
    use crate::trajectory::{compile_program, ArmModel};

    fn model() -> CalibrationModel {
        CalibrationModel { w: 1.178, b: -0.801, h_tip: 0.0, r2: 0.957, max_residual: 1.716 }
    }

    fn straight(descent: f64, length: f64, params: StyleParams) -> (RobotProgram, WorkspaceFrame) {
        let frame = WorkspaceFrame::default();
        let n = (length / 2.0) as usize + 1;
        let s = MappedStroke {
            stroke_id: 1,
            style_hint: StyleHint::Plain,
            points: (0..n).map(|i| MappedPoint { x: 210.0, y: -60.0 + 2.0 * i as f64, thickness: 0.0, descent, clamped: false }).collect(),
        };
        let st = StrokeStyle {
            stroke_id: 1,
            kind: StyleKind::Plain,
            params,
            actions: brush_actions(StyleKind::Plain, &frame, &params),
            noutan: 0.0,
            kasure: Dryness { value: 0.0, dry: false },
        };
        (compile_program(&[s], &[st], &ArmModel::default(), &frame).unwrap(), frame)
    }

    fn run(p: &RobotProgram, frame: &WorkspaceFrame, params: &StyleParams) -> CanvasRaster {
        let cfg = SimConfig::default();
        let mut canvas = CanvasRaster::for_frame(frame, cfg.px_per_mm);
        let mut brush = BrushState::new(&cfg);
        execute_program(p, &mut brush, &mut canvas, frame, &model(), params, &cfg).unwrap();
        canvas
    }

    #[test]
    fn footprint_inverts_calibration() {
        let m = CalibrationModel { w: 1.0, b: 0.0, h_tip: 0.0, r2: 1.0, max_residual: 0.0 };
        assert_eq!(footprint_width(7.0, &m), 7.0);
        assert!((footprint_width(10.0, &model()) - 9.169).abs() < 1e-3);
        assert_eq!(footprint_width(-1.0, &model()), 0.0);
    }

    #[test]
    fn empty_program_leaves_canvas() {
        let frame = WorkspaceFrame::default();
        let c = run(&RobotProgram::default(), &frame, &StyleParams::default());
        assert!(c.density.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn stroke_width_follows_descent() {
        let params = StyleParams { lambda: 0.5, t_dip: 3.0, ..Default::default() };
        let mut prev = 0;
        for d in [2.0, 8.0, 14.0] {
            let (p, f) = straight(d, 40.0, params);
            let c = run(&p, &f, &params);
            // cross-section at the middle of the stroke, along the columns
            let row = c.to_px(Vec2::new(210.0, -40.0)).y as usize;
            let col = c.to_px(Vec2::new(210.0, -40.0)).x as usize;
            let width = (0..c.height).filter(|&r| c.get(col, r) > 0.05).count();
            let expect = footprint_width(d, &model()) * c.px_per_mm;
            assert!((width as f64 - expect).abs() <= 2.0, "{d}: {width} vs {expect} (row {row})");
            assert!(width > prev);
            prev = width;
        }
    }

    #[test]
    fn dry_brush_leaves_gaps_and_is_deterministic() {
        let params = StyleParams { lambda: 1.0 / 6.0, t_dip: 0.5, ..Default::default() };
        let (p, f) = straight(6.0, 120.0, params);
        let a = run(&p, &f, &params);
        let b = run(&p, &f, &params);
        assert_eq!(a, b);
        let end = a.to_px(Vec2::new(210.0, 58.0));
        let col = end.x as usize;
        assert!((0..a.height).all(|r| a.get(col, r) == 0.0));
    }

    #[test]
    fn off_canvas_is_rejected() {
        let params = StyleParams::default();
        let (mut p, f) = straight(6.0, 20.0, params);
        for s in p.segments.iter_mut().filter(|s| s.kind == SegmentKind::Draw) {
            s.waypoints[1][1] = 500.0;
        }
        let cfg = SimConfig::default();
        let mut canvas = CanvasRaster::for_frame(&f, cfg.px_per_mm);
        let mut brush = BrushState::new(&cfg);
        assert!(matches!(
            execute_program(&p, &mut brush, &mut canvas, &f, &model(), &params, &cfg),
            Err(SimError::OffCanvas { .. })
        ));
    }
}
