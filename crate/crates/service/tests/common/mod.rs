#![allow(dead_code)]

use std::path::PathBuf;

use sumie_core::fixtures;
use sumie_core::par::Execution;
use sumie_core::pipeline::default_view;
use sumie_service::project::{Project, Settings, Stage};
use sumie_service::run_stage;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub path: PathBuf,
}

/// A teapot project in a fresh directory, with the stages up to and
/// including `through` already run.
pub fn teapot_project(id: &str, through: Option<Stage>) -> (Fixture, Project) {
    let dir = tempfile::tempdir().unwrap();
    let mesh = fixtures::teapot();
    std::fs::write(dir.path().join("teapot.obj"), mesh.to_obj()).unwrap();
    let path = dir.path().join(format!("{id}.json"));
    let mut p = Project::new(id, "teapot.obj".into(), Settings::with_view(default_view(&mesh, 512))).unwrap();
    p.save(&path).unwrap();
    if let Some(last) = through {
        for s in Stage::ALL.into_iter().filter(|&s| s <= last) {
            run_stage(&mut p, &path, s, Execution::Parallel).unwrap();
        }
    }
    (Fixture { dir, path }, p)
}
