//! Calibration of thickness against brush descent, and the mapping of
//! optimized strokes from image pixels into the robot's Cartesian frame.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::editor::StyleHint;
use crate::geom::{bounds2, Vec2};
use crate::optimize::OptimizedStroke;

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("calibration table: {0}")]
    Table(String),
    #[error("calibration needs at least two distinct thicknesses")]
    RankDeficient,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("workspace frame: {0}")]
    Frame(String),
    #[error("stroke {stroke_id} leaves the paper at ({x:.2}, {y:.2}) mm")]
    OutOfBounds { stroke_id: u64, x: f64, y: f64 },
    #[error("nothing to map")]
    Empty,
    #[error("invalid scale {0}")]
    Scale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    /// Descent below the tip-contact height, mm.
    pub descent_mm: f64,
    /// Measured stroke thickness, mm.
    pub thickness_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationTable {
    /// Sorts rows by descent, then validates.
    pub fn new(mut rows: Vec<CalibrationRow>) -> Result<Self, MappingError> {
        rows.sort_by(|a, b| a.descent_mm.total_cmp(&b.descent_mm));
        let t = Self { rows };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        if self.rows.len() < 2 {
            return Err(MappingError::Table("need at least 2 rows".into()));
        }
        if self.rows.windows(2).any(|w| w[1].descent_mm <= w[0].descent_mm) {
            return Err(MappingError::Table("descents must be strictly increasing".into()));
        }
        if self.rows.iter().any(|r| !(r.thickness_mm > 0.0) || !r.descent_mm.is_finite()) {
            return Err(MappingError::Table("thickness must be positive".into()));
        }
        Ok(())
    }

    /// Reads `descent_mm,thickness_mm` CSV with a header row.
    pub fn from_csv(reader: impl Read) -> Result<Self, MappingError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let rows = rdr.deserialize().collect::<Result<Vec<CalibrationRow>, _>>()?;
        Self::new(rows)
    }

    pub fn to_csv(&self, writer: impl Write) -> Result<(), MappingError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// `h = w t + b + h_tip`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationModel {
    pub w: f64,
    pub b: f64,
    pub h_tip: f64,
    pub r2: f64,
    /// Largest absolute descent residual on the calibration data, mm.
    pub max_residual: f64,
}

impl CalibrationModel {
    /// Least-squares fit of descent against thickness. Row order does not
    /// matter: the sums are taken over rows sorted by thickness.
    pub fn fit(table: &CalibrationTable, h_tip: f64) -> Result<Self, MappingError> {
        table.validate()?;
        let mut rows = table.rows.clone();
        rows.sort_by(|a, b| a.thickness_mm.total_cmp(&b.thickness_mm).then(a.descent_mm.total_cmp(&b.descent_mm)));
        let n = rows.len() as f64;
        let mt = rows.iter().map(|r| r.thickness_mm).sum::<f64>() / n;
        let mh = rows.iter().map(|r| r.descent_mm).sum::<f64>() / n;
        let sxx: f64 = rows.iter().map(|r| (r.thickness_mm - mt).powi(2)).sum();
        let sxy: f64 = rows.iter().map(|r| (r.thickness_mm - mt) * (r.descent_mm - mh)).sum();
        if sxx <= 1e-12 * (1.0 + mt * mt) {
            return Err(MappingError::RankDeficient);
        }
        let w = sxy / sxx;
        let b = mh - w * mt;
        let resid: Vec<f64> = rows.iter().map(|r| r.descent_mm - (w * r.thickness_mm + b)).collect();
        let ss_res: f64 = resid.iter().map(|e| e * e).sum();
        let ss_tot: f64 = rows.iter().map(|r| (r.descent_mm - mh).powi(2)).sum();
        let r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
        let max_residual = resid.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        Ok(Self { w, b, h_tip, r2, max_residual })
    }

    /// Height for thickness `t`; heights below the tip are clamped to the
    /// tip and flagged.
    pub fn thickness_to_descent(&self, t: f64) -> Descent {
        let h = self.w * t + self.b + self.h_tip;
        if t > 0.0 && h >= self.h_tip {
            Descent { h, clamped: false }
        } else {
            Descent { h: self.h_tip, clamped: true }
        }
    }

    /// Thickness the regression predicts at height `h`.
    pub fn descent_to_thickness(&self, h: f64) -> f64 {
        (h - self.h_tip - self.b) / self.w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descent {
    pub h: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    pub fn size(&self) -> Vec2 {
        Vec2::new(self.max[0] - self.min[0], self.max[1] - self.min[1])
    }

    /// Distance from `p` to the rectangle (0 inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        let dx = (self.min[0] - p.x).max(p.x - self.max[0]).max(0.0);
        let dy = (self.min[1] - p.y).max(p.y - self.max[1]).max(0.0);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InkStones {
    pub light: [f64; 2],
    pub thick: [f64; 2],
    pub radius: f64,
}

/// Robot-frame layout of the drawing table, in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkspaceFrame {
    pub center: [f64; 2],
    pub paper: Rect,
    /// Height at which the brush tip just touches the paper.
    pub paper_z: f64,
    /// Travel height, above the paper.
    pub safe_height: f64,
    pub ink_stones: InkStones,
}

impl Default for WorkspaceFrame {
    fn default() -> Self {
        Self {
            center: [210.0, 0.0],
            paper: Rect { min: [165.0, -75.0], max: [255.0, 75.0] },
            paper_z: -40.0,
            safe_height: -10.0,
            ink_stones: InkStones { light: [175.0, 120.0], thick: [175.0, -120.0], radius: 15.0 },
        }
    }
}

impl WorkspaceFrame {
    pub fn validate(&self) -> Result<(), MappingError> {
        let bad = |m: &str| Err(MappingError::Frame(m.into()));
        let s = self.paper.size();
        if !(s.x > 0.0 && s.y > 0.0) {
            return bad("empty paper rectangle");
        }
        if !self.paper.contains(Vec2::from(self.center)) {
            return bad("center outside the paper");
        }
        if !(self.safe_height > self.paper_z) {
            return bad("safe height must be above the paper");
        }
        let st = &self.ink_stones;
        if !(st.radius >= 0.0) {
            return bad("negative ink stone radius");
        }
        for c in [st.light, st.thick] {
            if self.paper.distance(Vec2::from(c)) <= st.radius {
                return bad("ink stone overlaps the paper");
            }
        }
        if (Vec2::from(st.light) - Vec2::from(st.thick)).norm() <= 2.0 * st.radius {
            return bad("ink stones overlap");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MappedPoint {
    pub x: f64,
    pub y: f64,
    /// Target stroke thickness, mm.
    pub thickness: f64,
    /// Descent below the tip-contact height, mm.
    pub descent: f64,
    /// The thickness was below what the tip can draw.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MappedStroke {
    pub stroke_id: u64,
    pub style_hint: StyleHint,
    pub points: Vec<MappedPoint>,
}

impl MappedStroke {
    pub fn positions(&self) -> Vec<Vec2> {
        self.points.iter().map(|p| Vec2::new(p.x, p.y)).collect()
    }

    pub fn thickness(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.thickness).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MappedDocument {
    pub px_to_mm: f64,
    pub centroid: [f64; 2],
    pub strokes: Vec<MappedStroke>,
}

/// Mean of every sample of every stroke.
pub fn document_centroid(strokes: &[OptimizedStroke]) -> Option<Vec2> {
    let n: usize = strokes.iter().map(|s| s.samples.len()).sum();
    (n > 0).then(|| strokes.iter().flat_map(|s| &s.samples).sum::<Vec2>() / n as f64)
}

/// Scale that keeps every sample, mapped about the centroid, inside the
/// paper shrunk by a 10% margin on each side.
pub fn default_px_to_mm(strokes: &[OptimizedStroke], frame: &WorkspaceFrame, model: &CalibrationModel) -> Result<f64, MappingError> {
    let c = document_centroid(strokes).ok_or(MappingError::Empty)?;
    let (lo, hi) = bounds2(strokes.iter().flat_map(|s| s.samples.iter().copied())).ok_or(MappingError::Empty)?;
    let o = Vec2::from(frame.center);
    // robot x follows image y, robot y follows image x
    let room_x = (frame.paper.max[0] - o.x).min(o.x - frame.paper.min[0]) - 0.1 * frame.paper.size().x;
    let room_y = (frame.paper.max[1] - o.y).min(o.y - frame.paper.min[1]) - 0.1 * frame.paper.size().y;
    let reach_y = (hi.y - c.y).max(c.y - lo.y) * model.w;
    let reach_x = (hi.x - c.x).max(c.x - lo.x) * model.w;
    let mut s = f64::INFINITY;
    if reach_y > 0.0 {
        s = s.min(room_x / reach_y);
    }
    if reach_x > 0.0 {
        s = s.min(room_y / reach_x);
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(MappingError::Scale(s));
    }
    Ok(s)
}

/// Maps one stroke: `x' = w s (y - yc) + xo`, `y' = w s (x - xc) + yo`,
/// thickness converted with `s` and then to descent.
pub fn map_stroke(
    stroke: &OptimizedStroke,
    centroid: Vec2,
    px_to_mm: f64,
    frame: &WorkspaceFrame,
    model: &CalibrationModel,
) -> Result<MappedStroke, MappingError> {
    if !(px_to_mm > 0.0 && px_to_mm.is_finite()) {
        return Err(MappingError::Scale(px_to_mm));
    }
    let k = model.w * px_to_mm;
    let points = stroke
        .samples
        .iter()
        .zip(&stroke.thickness)
        .map(|(p, &t)| {
            let x = k * (p.y - centroid.y) + frame.center[0];
            let y = k * (p.x - centroid.x) + frame.center[1];
            if !frame.paper.contains(Vec2::new(x, y)) {
                return Err(MappingError::OutOfBounds { stroke_id: stroke.stroke_id, x, y });
            }
            let thickness = t * px_to_mm;
            let d = model.thickness_to_descent(thickness);
            Ok(MappedPoint { x, y, thickness, descent: d.h - model.h_tip, clamped: d.clamped })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MappedStroke { stroke_id: stroke.stroke_id, style_hint: stroke.style_hint, points })
}

/// Maps every stroke about the document centroid.
pub fn map_document(
    strokes: &[OptimizedStroke],
    px_to_mm: Option<f64>,
    frame: &WorkspaceFrame,
    model: &CalibrationModel,
) -> Result<MappedDocument, MappingError> {
    frame.validate()?;
    let centroid = document_centroid(strokes).ok_or(MappingError::Empty)?;
    let s = match px_to_mm {
        Some(s) => s,
        None => default_px_to_mm(strokes, frame, model)?,
    };
    let strokes = strokes.iter().map(|st| map_stroke(st, centroid, s, frame, model)).collect::<Result<_, _>>()?;
    Ok(MappedDocument { px_to_mm: s, centroid: [centroid.x, centroid.y], strokes })
}
