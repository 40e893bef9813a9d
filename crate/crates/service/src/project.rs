//! The project file: one JSON document holding every setting, the stroke
//! document and a record per stage run, next to a directory of artifacts.
//!
//! A stage record stores the hash of the inputs it was computed from. A stage
//! is fresh when its record exists, its inputs still hash to the recorded
//! value, its artifacts still hash to the recorded output and every upstream
//! stage is fresh; anything else is stale and is never served.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sumie_core::contours::{ContourParams, Viewpoint};
use sumie_core::editor::{DocParams, StrokeDocument};
use sumie_core::mapping::{CalibrationModel, CalibrationTable, WorkspaceFrame};
use sumie_core::optimize::FitConfig;
use sumie_core::pipeline::PipelineConfig;
use sumie_core::sim::SimConfig;
use sumie_core::simplify::SimplifierConfig;
use sumie_core::styles::StyleParams;
use sumie_core::trajectory::ArmModel;
use sumie_core::fixtures;

use crate::ServiceError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Contours,
    Simplify,
    Vectorize,
    Optimize,
    Map,
    Styles,
    Compile,
    Simulate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Contours,
        Stage::Simplify,
        Stage::Vectorize,
        Stage::Optimize,
        Stage::Map,
        Stage::Styles,
        Stage::Compile,
        Stage::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Contours => "contours",
            Stage::Simplify => "simplify",
            Stage::Vectorize => "vectorize",
            Stage::Optimize => "optimize",
            Stage::Map => "map",
            Stage::Styles => "styles",
            Stage::Compile => "compile",
            Stage::Simulate => "simulate",
        }
    }

    /// The stage whose output this one consumes.
    pub fn upstream(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|&s| s == self)?;
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }

    /// Files this stage writes into the artifact directory.
    pub fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Contours => &["contours.png", "contours-tags.png"],
            Stage::Simplify => &["skeleton.png", "skeleton-tags.png"],
            Stage::Vectorize => &["candidates.json"],
            Stage::Optimize => &["optimized.json"],
            Stage::Map => &["mapped.json"],
            Stage::Styles => &["styles.json"],
            Stage::Compile => &["program.jsonl"],
            Stage::Simulate => &["canvas.png"],
        }
    }

    /// Stage that produces the named artifact.
    pub fn producing(file: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.artifacts().contains(&file))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| ServiceError::UnknownStage(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StageRecord {
    pub input_hash: String,
    pub output_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Freshness {
    Fresh,
    Stale,
    Missing,
}

/// Every tunable input of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Settings {
    pub view: Viewpoint,
    pub contours: ContourParams,
    pub simplifier: SimplifierConfig,
    pub doc: DocParams,
    pub pick_min_length: f64,
    pub fit: FitConfig,
    pub px_to_mm: Option<f64>,
    pub frame: WorkspaceFrame,
    pub calibration: CalibrationTable,
    /// Brush height at first paper contact, mm.
    pub h_tip: f64,
    /// Defaults for every stroke; see [`Project::stroke_styles`].
    pub style: StyleParams,
    pub arm: ArmModel,
    pub sim: SimConfig,
}

impl Settings {
    /// Pipeline defaults with the given camera.
    pub fn with_view(view: Viewpoint) -> Self {
        let p = PipelineConfig::default();
        Self {
            view,
            contours: p.contours,
            simplifier: p.simplifier,
            doc: p.doc,
            pick_min_length: p.pick_min_length,
            fit: p.fit,
            px_to_mm: p.px_to_mm,
            frame: p.frame,
            calibration: fixtures::table_i(),
            h_tip: 0.0,
            style: p.style,
            arm: p.arm,
            sim: p.sim,
        }
    }

    pub fn calibration_model(&self) -> Result<CalibrationModel, ServiceError> {
        Ok(CalibrationModel::fit(&self.calibration, self.h_tip)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Project {
    pub format: u32,
    pub id: String,
    /// Mesh file, relative paths resolve against the project file.
    pub mesh: PathBuf,
    /// Bumped by every document mutation; clients send it back with edits.
    pub revision: u64,
    pub settings: Settings,
    pub document: Option<StrokeDocument>,
    /// Per-stroke overrides of the dip parameters.
    pub stroke_styles: BTreeMap<u64, StyleParams>,
    pub stages: BTreeMap<Stage, StageRecord>,
}

impl Project {
    pub fn new(id: impl Into<String>, mesh: PathBuf, settings: Settings) -> Result<Self, ServiceError> {
        let id = id.into();
        validate_id(&id)?;
        Ok(Self { format: FORMAT_VERSION, id, mesh, revision: 0, settings, document: None, stroke_styles: BTreeMap::new(), stages: BTreeMap::new() })
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let p: Project = serde_json::from_str(&text)?;
        if p.format != FORMAT_VERSION {
            return Err(ServiceError::Format(p.format));
        }
        if let Some(doc) = &p.document {
            // reject a document whose log does not replay to its state
            StrokeDocument::from_json(&serde_json::to_string(doc)?).map_err(|e| ServiceError::Document(e.to_string()))?;
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), ServiceError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }

    pub fn mesh_path(&self, project_path: &Path) -> PathBuf {
        match project_path.parent() {
            Some(dir) if self.mesh.is_relative() => dir.join(&self.mesh),
            _ => self.mesh.clone(),
        }
    }

    pub fn document(&self) -> Result<&StrokeDocument, ServiceError> {
        self.document.as_ref().ok_or(ServiceError::NoDocument)
    }
}

/// Project ids become file names, so they are kept to a safe alphabet.
pub fn validate_id(id: &str) -> Result<(), ServiceError> {
    let ok = !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ServiceError::BadId(id.to_string()))
    }
}

/// `foo.json` keeps its artifacts in `foo.artifacts/`.
pub fn artifacts_dir(project_path: &Path) -> PathBuf {
    project_path.with_extension("artifacts")
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers see either the old or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| ServiceError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ServiceError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| ServiceError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| ServiceError::io(path, e))?;
    tmp.persist(path).map_err(|e| ServiceError::io(path, e.error))?;
    Ok(())
}

/// Incremental SHA-256 over length-prefixed parts.
#[derive(Default)]
pub struct InputHasher(Sha256);

impl InputHasher {
    pub fn bytes(mut self, b: &[u8]) -> Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    pub fn json<T: Serialize>(self, v: &T) -> Result<Self, ServiceError> {
        Ok(self.bytes(&serde_json::to_vec(v)?))
    }

    pub fn finish(self) -> String {
        hex(&self.0.finalize())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}
