use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sumie_core::editor::EditOp;
use sumie_core::evaluation::AngleExperiment;
use sumie_core::fixtures;
use sumie_core::mesh::TriangleMesh;
use sumie_core::par::Execution;
use sumie_core::pipeline::default_view;
use sumie_core::styles::StyleParams;
use sumie_service::http::{serve, AppState};
use sumie_service::project::{write_atomic, Project, Settings, Stage};
use sumie_service::report::build_report;
use sumie_service::stages::{apply_edit, project_status, run_all, run_stage, set_stroke_style, undo_edit};

#[derive(Parser)]
#[command(name = "sumie", version, about = "Turn a 3D mesh into a robot ink-painting program")]
struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProjectArg {
    /// Project file (JSON); artifacts go next to it in `<name>.artifacts/`.
    project: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Create a project for a mesh.
    Ingest {
        mesh: PathBuf,
        project: PathBuf,
        /// Defaults to the project file name.
        #[arg(long)]
        id: Option<String>,
        /// Settings JSON replacing the defaults.
        #[arg(long)]
        settings: Option<PathBuf>,
        /// Rendered image size when no settings file is given.
        #[arg(long, default_value_t = 512)]
        size: u32,
    },
    /// Write the bundled low-poly teapot as OBJ.
    Teapot { out: PathBuf },
    Contours(ProjectArg),
    Simplify(ProjectArg),
    Vectorize(ProjectArg),
    /// Edit the stroke document, or serve the editor API.
    Edit {
        project: PathBuf,
        /// Editor op as JSON, e.g. `{"op":"pick","candidate":3}`.
        #[arg(long, conflicts_with_all = ["undo", "serve"])]
        op: Option<String>,
        #[arg(long, conflicts_with = "serve")]
        undo: bool,
        /// Revision the edit is based on; a mismatch is refused.
        #[arg(long)]
        revision: Option<u64>,
        /// Serve the HTTP API for the project's directory.
        #[arg(long)]
        serve: bool,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Static editor bundle to host at `/`.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    Optimize(ProjectArg),
    Map(ProjectArg),
    /// Plan stroke styles, optionally setting one stroke's dip parameters first.
    Styles {
        project: PathBuf,
        #[arg(long)]
        stroke: Option<u64>,
        /// Style parameters JSON for `--stroke`.
        #[arg(long, requires = "stroke", conflicts_with = "clear")]
        set: Option<String>,
        /// Remove the override of `--stroke`.
        #[arg(long, requires = "stroke")]
        clear: bool,
    },
    Compile(ProjectArg),
    Simulate(ProjectArg),
    /// Run every stage that is not fresh.
    RunAll(ProjectArg),
    /// Print revision and stage freshness.
    Status(ProjectArg),
    /// Turning-angle and style-sweep metrics as JSON.
    Report {
        project: PathBuf,
        /// Angle experiment settings JSON.
        #[arg(long)]
        experiment: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn stage(path: &Path, stage: Stage, exec: Execution) -> Result<()> {
    let mut p = Project::load(path)?;
    let record = run_stage(&mut p, path, stage, exec)?;
    println!("{stage}: {}", record.output_hash);
    Ok(())
}

fn ingest(mesh: &Path, project: &Path, id: Option<String>, settings: Option<&Path>, size: u32) -> Result<()> {
    let text = std::fs::read_to_string(mesh).with_context(|| format!("reading {}", mesh.display()))?;
    let m = TriangleMesh::from_obj(&text)?;
    let settings = match settings {
        Some(s) => serde_json::from_str::<Settings>(&std::fs::read_to_string(s)?).with_context(|| format!("parsing {}", s.display()))?,
        None => Settings::with_view(default_view(&m, size)),
    };
    let id = match id {
        Some(id) => id,
        None => project.file_stem().and_then(|s| s.to_str()).context("project file needs a name")?.to_string(),
    };
    // store the mesh relative to the project when both share a directory tree
    let mesh_abs = std::path::absolute(mesh)?;
    let base = std::path::absolute(project)?.parent().map(Path::to_path_buf).unwrap_or_default();
    let mesh_ref = mesh_abs.strip_prefix(&base).map(Path::to_path_buf).unwrap_or(mesh_abs);
    let p = Project::new(id, mesh_ref, settings)?;
    p.save(project)?;
    println!("created {} ({} vertices, {} faces)", project.display(), m.vertices().len(), m.faces().len());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Ingest { mesh, project, id, settings, size } => ingest(&mesh, &project, id, settings.as_deref(), size)?,
        Command::Teapot { out } => write_atomic(&out, fixtures::teapot().to_obj().as_bytes())?,
        Command::Contours(a) => stage(&a.project, Stage::Contours, exec)?,
        Command::Simplify(a) => stage(&a.project, Stage::Simplify, exec)?,
        Command::Vectorize(a) => stage(&a.project, Stage::Vectorize, exec)?,
        Command::Optimize(a) => stage(&a.project, Stage::Optimize, exec)?,
        Command::Map(a) => stage(&a.project, Stage::Map, exec)?,
        Command::Compile(a) => stage(&a.project, Stage::Compile, exec)?,
        Command::Simulate(a) => stage(&a.project, Stage::Simulate, exec)?,
        Command::Styles { project, stroke, set, clear } => {
            if let Some(id) = stroke {
                let mut p = Project::load(&project)?;
                let params = match (set, clear) {
                    (Some(json), _) => Some(serde_json::from_str::<StyleParams>(&json).context("parsing --set")?),
                    (None, true) => None,
                    (None, false) => bail!("--stroke needs --set or --clear"),
                };
                let out = set_stroke_style(&mut p, None, id, params)?;
                p.save(&project)?;
                println!("revision {}", out.revision);
            }
            stage(&project, Stage::Styles, exec)?;
        }
        Command::Edit { project, serve: true, addr, ui, .. } => {
            let dir = std::path::absolute(&project)?.parent().map(Path::to_path_buf).unwrap_or_default();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(AppState::new(dir, exec), &addr, ui))?;
        }
        Command::Edit { project, op, undo, revision, .. } => {
            let mut p = Project::load(&project)?;
            let out = match (op, undo) {
                (Some(json), _) => apply_edit(&mut p, revision, serde_json::from_str::<EditOp>(&json).context("parsing --op")?)?,
                (None, true) => undo_edit(&mut p, revision)?,
                (None, false) => bail!("edit needs --op, --undo or --serve"),
            };
            if out.changed {
                p.save(&project)?;
            }
            print_json(&out)?;
        }
        Command::RunAll(a) => {
            let mut p = Project::load(&a.project)?;
            let ran = run_all(&mut p, &a.project, exec)?;
            println!("ran {} stage(s)", ran.len());
        }
        Command::Status(a) => {
            let p = Project::load(&a.project)?;
            print_json(&project_status(&p, &a.project)?)?;
        }
        Command::Report { project, experiment, out } => {
            let p = Project::load(&project)?;
            let exp: AngleExperiment = match experiment {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(&path)?)?,
                None => AngleExperiment { fit: p.settings.fit.clone(), ..AngleExperiment::default() },
            };
            let report = build_report(&p, &project, &exp)?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            match out {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
