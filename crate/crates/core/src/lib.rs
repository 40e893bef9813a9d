//! Core algorithms for turning a 3D triangle mesh into a robot-drawable ink
//! painting.
//!
//! The stages mirror the drawing workflow:
//!
//! 1. [`contours`]: occluding contours, suggestive contours and apparent
//!    ridges extracted from a mesh and a camera, rasterized with hidden-line
//!    removal.
//! 2. [`simplify`]: raster to raster contour clean-up (blur, threshold,
//!    thin, prune, bridge) behind a pluggable [`simplify::Simplifier`].
//! 3. [`vectorize`]: skeleton tracing and curvature based corner splitting.
//! 4. [`editor`]: the editable stroke document with an undoable op log.
//! 5. [`optimize`]: cubic B-spline fitting by squared distance
//!    minimization, even resampling and the thickness profile.
//! 6. [`mapping`]: thickness to brush-descent calibration and the
//!    simulation to robot coordinate mapping.
//! 7. [`styles`]: Noutan and Kasure brush preparation and intensity models.
//! 8. [`trajectory`]: 4-DOF kinematics, trapezoidal profiles and program
//!    compilation.
//! 9. [`sim`]: a virtual brush that executes robot programs onto a canvas,
//!    plus the angle-of-contingence evaluation.
//!
//! Heavy inner loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod contours;
pub mod editor;
pub mod evaluation;
pub mod fixtures;
pub mod geom;
pub mod imageio;
pub mod mapping;
pub mod mesh;
pub mod optimize;
pub mod par;
pub mod pipeline;
pub mod sim;
pub mod simplify;
pub mod styles;
pub mod trajectory;
pub mod vectorize;

pub use contours::{ContourFamily, ContourImage, ContourSet, Viewpoint};
pub use editor::{EditOp, EditableStroke, StrokeDocument};
pub use mapping::{CalibrationModel, CalibrationTable, WorkspaceFrame};
pub use mesh::TriangleMesh;
pub use optimize::{BSplineCurve, FitConfig, OptimizedStroke};
pub use sim::{BrushState, CanvasRaster};
pub use styles::{BrushAction, StyleKind, StyleParams};
pub use trajectory::{ArmModel, JointPose, RobotProgram};
pub use vectorize::{CornerParams, RasterPolyline};
