//! The whole mesh-to-canvas chain with one config.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contours::{render_contours, ContourError, ContourImage, ContourParams, ContourSet, ViewError, Viewpoint};
use crate::editor::{DocParams, EditError, EditOp, StrokeDocument};
use crate::fixtures;
use crate::geom::Vec3;
use crate::mapping::{CalibrationModel, MappedDocument, MappingError, WorkspaceFrame};
use crate::mesh::TriangleMesh;
use crate::optimize::{optimize_strokes, FitConfig, OptimizeError, OptimizedStroke};
use crate::par::Execution;
use crate::sim::{execute_program, BrushState, CanvasRaster, SimConfig, SimError};
use crate::simplify::{simplify, SimplifierConfig, SimplifyError};
use crate::styles::{plan_styles, StrokeStyle, StyleError, StyleParams};
use crate::trajectory::{compile_program, ArmModel, RobotProgram, TrajectoryError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Contours(#[from] ContourError),
    #[error(transparent)]
    Simplify(#[from] SimplifyError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no strokes selected")]
    NoStrokes,
}

/// Default camera: a three-quarter view looking slightly down at the mesh.
pub fn default_view(mesh: &TriangleMesh, size: u32) -> Viewpoint {
    let (center, radius) = match mesh.bounds() {
        Some((lo, hi)) => ((lo + hi) / 2.0, ((hi - lo).norm() / 2.0).max(1e-9)),
        None => (Vec3::zeros(), 1.0),
    };
    Viewpoint::framing(center, radius, Vec3::new(1.0, -1.6, 0.7), 40.0, size)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PipelineConfig {
    /// Camera; `None` frames the mesh with [`default_view`].
    pub view: Option<Viewpoint>,
    pub image_size: u32,
    pub contours: ContourParams,
    pub simplifier: SimplifierConfig,
    pub doc: DocParams,
    /// Candidates at least this long (px) are selected automatically.
    pub pick_min_length: f64,
    pub fit: FitConfig,
    pub px_to_mm: Option<f64>,
    pub frame: WorkspaceFrame,
    pub calibration: CalibrationModel,
    pub style: StyleParams,
    pub arm: ArmModel,
    pub sim: SimConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let calibration = CalibrationModel::fit(&fixtures::table_i(), 0.0).expect("built-in table fits");
        Self {
            view: None,
            image_size: 512,
            contours: ContourParams::default(),
            simplifier: SimplifierConfig::default(),
            // pixel-level jaggies on mesh contours read as corners at the
            // editor default
            doc: DocParams { mu: 400.0, ..DocParams::default() },
            pick_min_length: 10.0,
            fit: FitConfig::default(),
            px_to_mm: None,
            frame: WorkspaceFrame::default(),
            calibration,
            style: StyleParams::default(),
            arm: ArmModel::default(),
            sim: SimConfig::default(),
        }
    }
}

/// Every intermediate artifact of one run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub view: Viewpoint,
    pub contours: ContourSet,
    pub contour_image: ContourImage,
    pub skeleton: ContourImage,
    pub document: StrokeDocument,
    pub optimized: Vec<OptimizedStroke>,
    pub mapped: MappedDocument,
    pub styles: Vec<StrokeStyle>,
    pub program: RobotProgram,
    pub canvas: CanvasRaster,
}

/// Builds the stroke document from a skeleton and selects every candidate of
/// at least `min_length` px on top of the outer contour.
pub fn build_document(
    skeleton: &ContourImage,
    view: &Viewpoint,
    model_ref: &str,
    params: DocParams,
    min_length: f64,
) -> Result<StrokeDocument, EditError> {
    let mut doc = StrokeDocument::from_skeleton(skeleton, view.clone(), model_ref, params)?;
    doc.apply(EditOp::PickAll { min_length })?;
    Ok(doc)
}

/// Runs a program on a fresh brush and a blank canvas covering the paper.
pub fn simulate(
    program: &RobotProgram,
    frame: &WorkspaceFrame,
    model: &CalibrationModel,
    style: &StyleParams,
    cfg: &SimConfig,
) -> Result<CanvasRaster, SimError> {
    cfg.validate()?;
    let mut brush = BrushState::new(cfg);
    let mut canvas = CanvasRaster::for_frame(frame, cfg.px_per_mm);
    execute_program(program, &mut brush, &mut canvas, frame, model, style, cfg)?;
    Ok(canvas)
}

pub fn run_pipeline(mesh: &TriangleMesh, cfg: &PipelineConfig, exec: Execution) -> Result<PipelineRun, PipelineError> {
    let view = cfg.view.clone().unwrap_or_else(|| default_view(mesh, cfg.image_size));
    view.validate()?;
    cfg.simplifier.validate()?;
    let (contours, contour_image) = render_contours(mesh, &view, &cfg.contours, exec)?;
    let skeleton = simplify(&contour_image, &cfg.simplifier, exec);
    let document = build_document(&skeleton, &view, "mesh", cfg.doc.clone(), cfg.pick_min_length)?;
    if document.selected().is_empty() {
        return Err(PipelineError::NoStrokes);
    }
    let optimized = optimize_strokes(document.selected(), &cfg.fit, cfg.doc.t_min, cfg.doc.t_max, exec)?;
    let mapped = crate::mapping::map_document(&optimized, cfg.px_to_mm, &cfg.frame, &cfg.calibration)?;
    let styles = plan_styles(&mapped.strokes, &cfg.frame, &cfg.style)?;
    let program = compile_program(&mapped.strokes, &styles, &cfg.arm, &cfg.frame)?;
    let canvas = simulate(&program, &cfg.frame, &cfg.calibration, &cfg.style, &cfg.sim)?;
    Ok(PipelineRun { view, contours, contour_image, skeleton, document, optimized, mapped, styles, program, canvas })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn teapot_end_to_end() {
        let run = run_pipeline(&fixtures::teapot(), &PipelineConfig::default(), Execution::default()).unwrap();
        let n = run.document.selected().len();
        assert!((10..=80).contains(&n), "{n} strokes");
        assert!(run.canvas.total_ink() > 0.0);
        assert_eq!(run.program.check_continuity().ok(), Some(()));
    }

    #[test]
    fn execution_modes_give_the_same_canvas() {
        let mesh = fixtures::teapot();
        let cfg = PipelineConfig::default();
        let a = run_pipeline(&mesh, &cfg, Execution::Sequential).unwrap();
        let b = run_pipeline(&mesh, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.program, b.program);
        assert_eq!(a.canvas, b.canvas);
    }
}
