//! Ink styles: the brush-preparation action program and the Noutan
//! (shading) and Kasure (dry brush) intensity models.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::editor::StyleHint;
use crate::geom::Vec2;
use crate::mapping::{MappedStroke, WorkspaceFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StyleError {
    #[error("invalid style params: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleKind {
    Noutan,
    Kasure,
    #[default]
    Plain,
}

impl From<StyleHint> for StyleKind {
    fn from(h: StyleHint) -> Self {
        match h {
            StyleHint::Noutan => StyleKind::Noutan,
            StyleHint::Kasure => StyleKind::Kasure,
            StyleHint::Plain => StyleKind::Plain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InkStone {
    Light,
    Thick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BrushAction {
    Translate { target: [f64; 2] },
    #[serde(rename_all = "camelCase")]
    Dip { stone: InkStone, dip_duration: f64, dip_depth: f64 },
    Scrape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct StyleParams {
    /// Dipped ratio `L_dip / L_brush`.
    pub lambda: f64,
    /// Dip duration in the thick stone, s.
    pub t_dip: f64,
    /// Bristle length, mm.
    pub l_brush: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Soak in the light stone before scraping (Noutan only), s.
    pub light_dip: f64,
    pub style: StyleKind,
}

impl Default for StyleParams {
    fn default() -> Self {
        Self { lambda: 1.0 / 3.0, t_dip: 2.5, l_brush: 20.0, c1: 1.0, c2: 1.0, c3: 1.0, light_dip: 1.0, style: StyleKind::Plain }
    }
}

impl StyleParams {
    pub fn validate(&self) -> Result<(), StyleError> {
        let bad = |m: &str| Err(StyleError::Params(m.into()));
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda must be in (0, 1]");
        }
        if !(self.t_dip >= 0.0 && self.t_dip.is_finite()) || !(self.light_dip >= 0.0) {
            return bad("dip durations must be >= 0");
        }
        if !(self.l_brush > 0.0) {
            return bad("brush length must be > 0");
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.c3 > 0.0) {
            return bad("model constants must be > 0");
        }
        Ok(())
    }

    pub fn dip_depth(&self) -> f64 {
        self.lambda * self.l_brush
    }
}

/// Diagonal scrape offset for step `n` in 1..=4:
/// `((-1)^n r cos(pi/4), (-1)^floor(n/2) r sin(pi/4))`.
pub fn scrape_offset(n: u32, r: f64) -> Vec2 {
    let sx = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let sy = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    Vec2::new(sx * r * FRAC_PI_4.cos(), sy * r * FRAC_PI_4.sin())
}

/// Light-ink soak and four cross scrapes, then the dip in the thick stone.
pub fn noutan_actions(frame: &WorkspaceFrame, params: &StyleParams) -> Vec<BrushAction> {
    let st = &frame.ink_stones;
    let light = Vec2::from(st.light);
    let mut out = Vec::with_capacity(18);
    for n in 1..=4 {
        out.push(BrushAction::Translate { target: st.light });
        out.push(BrushAction::Dip { stone: InkStone::Light, dip_duration: params.light_dip, dip_depth: params.l_brush });
        let p = light + scrape_offset(n, st.radius);
        out.push(BrushAction::Translate { target: [p.x, p.y] });
        out.push(BrushAction::Scrape);
    }
    out.extend(thick_dip(frame, params));
    out
}

fn thick_dip(frame: &WorkspaceFrame, params: &StyleParams) -> [BrushAction; 2] {
    [
        BrushAction::Translate { target: frame.ink_stones.thick },
        BrushAction::Dip { stone: InkStone::Thick, dip_duration: params.t_dip, dip_depth: params.dip_depth() },
    ]
}

/// Brush preparation before a stroke. Kasure and plain strokes start from a
/// dry brush with a single thick-ink dip.
pub fn brush_actions(kind: StyleKind, frame: &WorkspaceFrame, params: &StyleParams) -> Vec<BrushAction> {
    match kind {
        StyleKind::Noutan => noutan_actions(frame, params),
        StyleKind::Kasure | StyleKind::Plain => thick_dip(frame, params).to_vec(),
    }
}

/// `lambda (1 - exp(-c1 T_dip))`.
pub fn noutan_degree(params: &StyleParams) -> f64 {
    params.lambda * (1.0 - (-params.c1 * params.t_dip).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dryness {
    /// `f64::INFINITY` when the brush never touched ink.
    pub value: f64,
    pub dry: bool,
}

/// Trapezoid area of the stroke over the ink the dip delivered:
/// `c2 sum (t_i + t_{i+1}) |C_i - C_{i+1}| / (2 lambda (1 - exp(-c3 T_dip)))`.
pub fn kasure_degree(samples: &[Vec2], thickness: &[f64], params: &StyleParams) -> Dryness {
    assert_eq!(samples.len(), thickness.len());
    let area: f64 = samples
        .windows(2)
        .zip(thickness.windows(2))
        .map(|(p, t)| (t[0] + t[1]) * (p[1] - p[0]).norm())
        .sum();
    let ink = 2.0 * params.lambda * (1.0 - (-params.c3 * params.t_dip).exp());
    if ink <= 0.0 {
        return Dryness { value: f64::INFINITY, dry: true };
    }
    Dryness { value: params.c2 * area / ink, dry: false }
}

/// Style decision for one mapped stroke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StrokeStyle {
    pub stroke_id: u64,
    pub kind: StyleKind,
    pub params: StyleParams,
    pub actions: Vec<BrushAction>,
    pub noutan: f64,
    pub kasure: Dryness,
}

/// Per-stroke style plans. Each stroke's hint picks the style; `params`
/// supplies the dip settings, with its own `style` field ignored.
pub fn plan_styles(strokes: &[MappedStroke], frame: &WorkspaceFrame, params: &StyleParams) -> Result<Vec<StrokeStyle>, StyleError> {
    params.validate()?;
    Ok(strokes
        .iter()
        .map(|s| {
            let kind = StyleKind::from(s.style_hint);
            let p = StyleParams { style: kind, ..*params };
            StrokeStyle {
                stroke_id: s.stroke_id,
                kind,
                params: p,
                actions: brush_actions(kind, frame, &p),
                noutan: noutan_degree(&p),
                kasure: kasure_degree(&s.positions(), &s.thickness(), &p),
            }
        })
        .collect())
}
