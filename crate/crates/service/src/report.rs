//! The `report` verb: turning-angle fidelity with and without optimization,
//! the dip-parameter sweep, and the current canvas hash.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sumie_core::evaluation::{angle_benefit, style_sweep, AngleExperiment, DescentComparison, StyleSweep};

use crate::project::{Freshness, Project, Stage};
use crate::stages::{artifact_sha256, stage_status};
use crate::ServiceError;

pub const SWEEP_LAMBDAS: [f64; 4] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 2.0, 2.0 / 3.0];
pub const SWEEP_DIPS: [f64; 3] = [0.5, 1.5, 2.5];
const SWEEP_LENGTH: f64 = 120.0;
const SWEEP_DESCENT: f64 = 6.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AngleSummary {
    pub descents: Vec<DescentComparison>,
    pub mean_unoptimized: f64,
    pub mean_optimized: f64,
    /// Optimized error is no worse at every descent.
    pub optimized_wins_everywhere: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub project: String,
    pub revision: u64,
    pub angles: AngleSummary,
    pub sweep: StyleSweep,
    /// SHA-256 of canvas.png, present only while the simulate stage is fresh.
    pub canvas_sha256: Option<String>,
}

pub fn build_report(p: &Project, project_path: &Path, exp: &AngleExperiment) -> Result<Report, ServiceError> {
    let s = &p.settings;
    let model = s.calibration_model()?;
    let descents = angle_benefit(exp, &s.frame, &s.arm, &model)?;
    let mean = |f: &dyn Fn(&DescentComparison) -> f64| {
        if descents.is_empty() {
            0.0
        } else {
            descents.iter().map(f).sum::<f64>() / descents.len() as f64
        }
    };
    let angles = AngleSummary {
        mean_unoptimized: mean(&|d| d.unoptimized.mean_abs_error),
        mean_optimized: mean(&|d| d.optimized.mean_abs_error),
        optimized_wins_everywhere: descents.iter().all(DescentComparison::optimized_wins),
        descents,
    };
    let sweep = style_sweep(&SWEEP_LAMBDAS, &SWEEP_DIPS, SWEEP_LENGTH, SWEEP_DESCENT, &s.style, &s.frame, &s.arm, &model, &s.sim)?;
    let fresh = stage_status(p, project_path)?.get(&Stage::Simulate) == Some(&Freshness::Fresh);
    let canvas_sha256 = if fresh { artifact_sha256(project_path, "canvas.png") } else { None };
    Ok(Report { project: p.id.clone(), revision: p.revision, angles, sweep, canvas_sha256 })
}
