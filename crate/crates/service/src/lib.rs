//! Project persistence, the stage runner, the HTTP API and reporting for the
//! sumie pipeline. The `sumie` binary wraps these in a CLI.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod http;
pub mod project;
pub mod report;
pub mod stages;

pub use project::{Freshness, Project, Settings, Stage, StageRecord};
pub use stages::{apply_edit, run_stage, stage_status, undo_edit};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported project format version {0}")]
    Format(u32),
    #[error("invalid project id {0:?}")]
    BadId(String),
    #[error("unknown stage {0:?}")]
    UnknownStage(String),
    #[error("unknown artifact {0:?}")]
    UnknownArtifact(String),
    #[error("{stage} needs fresh upstream output; rerun {rerun} first")]
    StaleUpstream { stage: project::Stage, rerun: project::Stage },
    #[error("artifact {file} is stale; rerun {rerun}")]
    StaleArtifact { file: String, rerun: project::Stage },
    #[error("revision conflict: edit based on {base}, project is at {current}")]
    Conflict { base: u64, current: u64 },
    #[error("project has no stroke document; run vectorize first")]
    NoDocument,
    #[error("stroke document: {0}")]
    Document(String),
    #[error(transparent)]
    Edit(#[from] sumie_core::editor::EditError),
    #[error(transparent)]
    Mesh(#[from] sumie_core::mesh::MeshError),
    #[error(transparent)]
    Contours(#[from] sumie_core::contours::ContourError),
    #[error(transparent)]
    Simplify(#[from] sumie_core::simplify::SimplifyError),
    #[error(transparent)]
    Optimize(#[from] sumie_core::optimize::OptimizeError),
    #[error(transparent)]
    Mapping(#[from] sumie_core::mapping::MappingError),
    #[error(transparent)]
    Style(#[from] sumie_core::styles::StyleError),
    #[error(transparent)]
    Trajectory(#[from] sumie_core::trajectory::TrajectoryError),
    #[error(transparent)]
    Sim(#[from] sumie_core::sim::SimError),
    #[error(transparent)]
    Image(#[from] sumie_core::imageio::ImageIoError),
    #[error(transparent)]
    Evaluation(#[from] sumie_core::evaluation::EvaluationError),
}

impl ServiceError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ServiceError::Io { path: path.to_path_buf(), source }
    }
}
