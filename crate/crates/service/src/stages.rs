//! Stage runs, freshness and document edits on a [`Project`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use sumie_core::contours::{render_contours, ContourImage};
use sumie_core::editor::{Applied, EditOp};
use sumie_core::imageio::{decode_gray_png, encode_gray_png};
use sumie_core::mapping::{map_document, MappedDocument};
use sumie_core::mesh::TriangleMesh;
use sumie_core::optimize::{optimize_strokes, OptimizedStroke};
use sumie_core::par::Execution;
use sumie_core::pipeline::{build_document, simulate};
use sumie_core::simplify::simplify;
use sumie_core::styles::{plan_styles, StrokeStyle, StyleParams};
use sumie_core::trajectory::{compile_program, RobotProgram};

use crate::project::{artifacts_dir, sha256_hex, write_atomic, Freshness, InputHasher, Project, Stage, StageRecord};
use crate::ServiceError;

fn read(dir: &Path, name: &str) -> Result<Vec<u8>, ServiceError> {
    let path = dir.join(name);
    std::fs::read(&path).map_err(|e| ServiceError::io(&path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<T, ServiceError> {
    Ok(serde_json::from_slice(&read(dir, name)?)?)
}

fn read_image(dir: &Path, stem: &str) -> Result<ContourImage, ServiceError> {
    let img = ContourImage::from_png(&read(dir, &format!("{stem}.png"))?)?;
    let (w, h, tags) = decode_gray_png(&read(dir, &format!("{stem}-tags.png"))?)?;
    if (w, h) != (img.width(), img.height()) {
        return Err(ServiceError::Document(format!("{stem}: tag image size differs")));
    }
    Ok(img.with_tags(tags))
}

fn image_outputs(img: &ContourImage, stem: &str) -> Result<Vec<(String, Vec<u8>)>, ServiceError> {
    Ok(vec![
        (format!("{stem}.png"), img.to_png()?),
        (format!("{stem}-tags.png"), encode_gray_png(img.width(), img.height(), img.tags())?),
    ])
}

/// Hash of a stage's artifact files as they are on disk.
fn output_hash(dir: &Path, stage: Stage) -> Option<String> {
    let mut h = InputHasher::default();
    for name in stage.artifacts() {
        h = h.bytes(name.as_bytes()).bytes(&std::fs::read(dir.join(name)).ok()?);
    }
    Some(h.finish())
}

/// Hash of everything `stage` reads. `None` when an upstream stage has never
/// run or there is no document yet.
pub fn input_hash(p: &Project, project_path: &Path, stage: Stage) -> Result<Option<String>, ServiceError> {
    let s = &p.settings;
    let upstream = |st: Stage| p.stages.get(&st).map(|r| r.output_hash.clone());
    let mut h = InputHasher::default().bytes(stage.name().as_bytes());
    if let Some(u) = stage.upstream() {
        match upstream(u) {
            Some(o) => h = h.bytes(o.as_bytes()),
            None => return Ok(None),
        }
    }
    let h = match stage {
        Stage::Contours => {
            let mesh = p.mesh_path(project_path);
            let bytes = std::fs::read(&mesh).map_err(|e| ServiceError::io(&mesh, e))?;
            h.bytes(&bytes).json(&s.view)?.json(&s.contours)?
        }
        Stage::Simplify => h.json(&s.simplifier)?,
        Stage::Vectorize => h.json(&s.view)?.json(&s.doc)?.json(&s.pick_min_length)?,
        Stage::Optimize => {
            let Some(doc) = &p.document else { return Ok(None) };
            let (t_min, t_max) = (doc.params().t_min, doc.params().t_max);
            h.json(&doc.selected())?.json(&(t_min, t_max))?.json(&s.fit)?
        }
        Stage::Map => h.json(&s.px_to_mm)?.json(&s.frame)?.json(&s.calibration)?.json(&s.h_tip)?,
        Stage::Styles => h.json(&s.style)?.json(&p.stroke_styles)?.json(&s.frame)?,
        Stage::Compile => match upstream(Stage::Map) {
            Some(m) => h.bytes(m.as_bytes()).json(&s.arm)?.json(&s.frame)?,
            None => return Ok(None),
        },
        Stage::Simulate => h.json(&s.sim)?.json(&s.calibration)?.json(&s.h_tip)?.json(&s.style)?.json(&s.frame)?,
    };
    Ok(Some(h.finish()))
}

/// Freshness of every stage, in pipeline order.
pub fn stage_status(p: &Project, project_path: &Path) -> Result<BTreeMap<Stage, Freshness>, ServiceError> {
    let dir = artifacts_dir(project_path);
    let mut out = BTreeMap::new();
    let mut upstream_fresh = true;
    for stage in Stage::ALL {
        let status = match p.stages.get(&stage) {
            None => Freshness::Missing,
            Some(_) if !upstream_fresh => Freshness::Stale,
            Some(rec) => {
                let inputs_match = input_hash(p, project_path, stage)?.as_deref() == Some(rec.input_hash.as_str());
                let outputs_match = output_hash(&dir, stage).as_deref() == Some(rec.output_hash.as_str());
                if inputs_match && outputs_match {
                    Freshness::Fresh
                } else {
                    Freshness::Stale
                }
            }
        };
        upstream_fresh = status == Freshness::Fresh;
        out.insert(stage, status);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProjectStatus {
    pub id: String,
    pub revision: u64,
    pub has_document: bool,
    pub stages: BTreeMap<Stage, Freshness>,
}

pub fn project_status(p: &Project, project_path: &Path) -> Result<ProjectStatus, ServiceError> {
    Ok(ProjectStatus {
        id: p.id.clone(),
        revision: p.revision,
        has_document: p.document.is_some(),
        stages: stage_status(p, project_path)?,
    })
}

/// Earliest stage at or before `stage` that is not fresh.
fn first_unfresh(status: &BTreeMap<Stage, Freshness>, stage: Stage) -> Option<Stage> {
    Stage::ALL.into_iter().take_while(|&s| s <= stage).find(|s| status[s] != Freshness::Fresh)
}

/// Runs one stage, writes its artifacts and saves the project. Downstream
/// stages become stale through their input hashes.
pub fn run_stage(p: &mut Project, project_path: &Path, stage: Stage, exec: Execution) -> Result<StageRecord, ServiceError> {
    if let Some(u) = stage.upstream() {
        let status = stage_status(p, project_path)?;
        if let Some(rerun) = first_unfresh(&status, u) {
            return Err(ServiceError::StaleUpstream { stage, rerun });
        }
    }
    let dir = artifacts_dir(project_path);
    let s = p.settings.clone();
    let outputs: Vec<(String, Vec<u8>)> = match stage {
        Stage::Contours => {
            let path = p.mesh_path(project_path);
            let text = std::fs::read_to_string(&path).map_err(|e| ServiceError::io(&path, e))?;
            let mesh = TriangleMesh::from_obj(&text)?;
            s.view.validate().map_err(sumie_core::contours::ContourError::from)?;
            let (_, img) = render_contours(&mesh, &s.view, &s.contours, exec)?;
            image_outputs(&img, "contours")?
        }
        Stage::Simplify => {
            s.simplifier.validate()?;
            let img = read_image(&dir, "contours")?;
            image_outputs(&simplify(&img, &s.simplifier, exec), "skeleton")?
        }
        Stage::Vectorize => {
            let skeleton = read_image(&dir, "skeleton")?;
            let model_ref = p.mesh.file_name().map_or_else(|| p.mesh.display().to_string(), |n| n.to_string_lossy().into_owned());
            let doc = build_document(&skeleton, &s.view, &model_ref, s.doc.clone(), s.pick_min_length)?;
            let candidates = serde_json::to_vec_pretty(doc.candidates())?;
            p.document = Some(doc);
            p.revision += 1;
            vec![("candidates.json".into(), candidates)]
        }
        Stage::Optimize => {
            let doc = p.document()?;
            let opt = optimize_strokes(doc.selected(), &s.fit, doc.params().t_min, doc.params().t_max, exec)?;
            vec![("optimized.json".into(), serde_json::to_vec_pretty(&opt)?)]
        }
        Stage::Map => {
            let opt: Vec<OptimizedStroke> = read_json(&dir, "optimized.json")?;
            let mapped = map_document(&opt, s.px_to_mm, &s.frame, &s.calibration_model()?)?;
            vec![("mapped.json".into(), serde_json::to_vec_pretty(&mapped)?)]
        }
        Stage::Styles => {
            let mapped: MappedDocument = read_json(&dir, "mapped.json")?;
            let mut styles = Vec::with_capacity(mapped.strokes.len());
            for st in &mapped.strokes {
                let params = p.stroke_styles.get(&st.stroke_id).unwrap_or(&s.style);
                styles.extend(plan_styles(std::slice::from_ref(st), &s.frame, params)?);
            }
            vec![("styles.json".into(), serde_json::to_vec_pretty(&styles)?)]
        }
        Stage::Compile => {
            let mapped: MappedDocument = read_json(&dir, "mapped.json")?;
            let styles: Vec<StrokeStyle> = read_json(&dir, "styles.json")?;
            let program = compile_program(&mapped.strokes, &styles, &s.arm, &s.frame)?;
            vec![("program.jsonl".into(), program.to_jsonl().into_bytes())]
        }
        Stage::Simulate => {
            let program = RobotProgram::read_jsonl(read(&dir, "program.jsonl")?.as_slice())?;
            let canvas = simulate(&program, &s.frame, &s.calibration_model()?, &s.style, &s.sim)?;
            vec![("canvas.png".into(), canvas.to_png()?)]
        }
    };
    let input = input_hash(p, project_path, stage)?.ok_or(ServiceError::NoDocument)?;
    for (name, bytes) in &outputs {
        write_atomic(&dir.join(name), bytes)?;
    }
    let output = output_hash(&dir, stage).ok_or_else(|| ServiceError::UnknownArtifact(stage.artifacts()[0].into()))?;
    let record = StageRecord { input_hash: input, output_hash: output };
    p.stages.insert(stage, record.clone());
    p.save(project_path)?;
    log::info!("{stage}: {} artifact(s), output {}", outputs.len(), &record.output_hash[..12]);
    Ok(record)
}

/// Bytes of an artifact, refused unless its stage is fresh.
pub fn read_artifact(p: &Project, project_path: &Path, name: &str) -> Result<Vec<u8>, ServiceError> {
    let stage = Stage::producing(name).ok_or_else(|| ServiceError::UnknownArtifact(name.to_string()))?;
    let status = stage_status(p, project_path)?;
    if let Some(rerun) = first_unfresh(&status, stage) {
        return Err(ServiceError::StaleArtifact { file: name.to_string(), rerun });
    }
    read(&artifacts_dir(project_path), name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EditOutcome {
    pub revision: u64,
    pub changed: bool,
    pub message: Option<String>,
}

fn check_revision(p: &Project, base: Option<u64>) -> Result<(), ServiceError> {
    match base {
        Some(b) if b != p.revision => Err(ServiceError::Conflict { base: b, current: p.revision }),
        _ => Ok(()),
    }
}

/// Applies an editor op. `base` is the revision the client last saw; a
/// mismatch is a conflict and nothing changes.
pub fn apply_edit(p: &mut Project, base: Option<u64>, op: EditOp) -> Result<EditOutcome, ServiceError> {
    check_revision(p, base)?;
    let doc = p.document.as_mut().ok_or(ServiceError::NoDocument)?;
    let (changed, message) = match doc.apply(op)? {
        Applied::Changed => (true, None),
        Applied::Unchanged(msg) => (false, Some(msg)),
    };
    if changed {
        p.revision += 1;
    }
    Ok(EditOutcome { revision: p.revision, changed, message })
}

pub fn undo_edit(p: &mut Project, base: Option<u64>) -> Result<EditOutcome, ServiceError> {
    check_revision(p, base)?;
    p.document.as_mut().ok_or(ServiceError::NoDocument)?.undo()?;
    p.revision += 1;
    Ok(EditOutcome { revision: p.revision, changed: true, message: None })
}

/// Sets or clears (`None`) a stroke's dip parameter override.
pub fn set_stroke_style(p: &mut Project, base: Option<u64>, id: u64, params: Option<StyleParams>) -> Result<EditOutcome, ServiceError> {
    check_revision(p, base)?;
    if p.document()?.stroke(id).is_none() {
        return Err(sumie_core::editor::EditError::UnknownStroke(id).into());
    }
    if let Some(sp) = &params {
        sp.validate()?;
    }
    let changed = match params {
        Some(sp) => p.stroke_styles.insert(id, sp) != Some(sp),
        None => p.stroke_styles.remove(&id).is_some(),
    };
    if changed {
        p.revision += 1;
    }
    Ok(EditOutcome { revision: p.revision, changed, message: None })
}

/// Runs every stage from the first one that is not fresh.
pub fn run_all(p: &mut Project, project_path: &Path, exec: Execution) -> Result<Vec<Stage>, ServiceError> {
    let status = stage_status(p, project_path)?;
    let Some(start) = first_unfresh(&status, Stage::Simulate) else { return Ok(Vec::new()) };
    let todo: Vec<Stage> = Stage::ALL.into_iter().filter(|&s| s >= start).collect();
    for &s in &todo {
        run_stage(p, project_path, s, exec)?;
    }
    Ok(todo)
}

/// SHA-256 of an artifact file, for reports.
pub fn artifact_sha256(project_path: &Path, name: &str) -> Option<String> {
    std::fs::read(artifacts_dir(project_path).join(name)).ok().map(|b| sha256_hex(&b))
}
