//! Raster to raster contour simplification.
//!
//! [`Simplifier`] is the seam where a learned model can be plugged in; the
//! bundled [`ClassicSimplifier`] runs blur, threshold, thinning, spur
//! pruning, gap bridging and small-component removal.

pub mod morph;

use std::path::PathBuf;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contours::ContourImage;
use crate::imageio::ImageIoError;
use crate::par::Execution;
use morph::Mask;

#[derive(Debug, Error)]
pub enum SimplifyError {
    #[error("invalid simplifier config: {0}")]
    Config(String),
    #[error("image size mismatch: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("external simplifier failed: {0}")]
    External(String),
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SimplifierConfig {
    pub blur_sigma: f64,
    pub binarize_threshold: f64,
    pub min_component_area: usize,
    pub prune_branch_length: usize,
    pub gap_close_radius: f64,
}

impl Default for SimplifierConfig {
    fn default() -> Self {
        Self {
            blur_sigma: 1.0,
            binarize_threshold: 0.25,
            min_component_area: 25,
            prune_branch_length: 8,
            gap_close_radius: 4.0,
        }
    }
}

impl SimplifierConfig {
    pub fn validate(&self) -> Result<(), SimplifyError> {
        if !(self.blur_sigma >= 0.0) || !(self.gap_close_radius >= 0.0) {
            return Err(SimplifyError::Config("sigma and radius must be non-negative".into()));
        }
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return Err(SimplifyError::Config(format!(
                "binarizeThreshold {} outside (0, 1)",
                self.binarize_threshold
            )));
        }
        Ok(())
    }
}

pub trait Simplifier: Send + Sync {
    fn simplify(&self, img: &ContourImage) -> Result<ContourImage, SimplifyError>;
}

#[derive(Debug, Clone, Default)]
pub struct ClassicSimplifier {
    pub config: SimplifierConfig,
    pub exec: Execution,
}

impl ClassicSimplifier {
    pub fn new(config: SimplifierConfig) -> Self {
        Self { config, exec: Execution::default() }
    }
}

impl Simplifier for ClassicSimplifier {
    fn simplify(&self, img: &ContourImage) -> Result<ContourImage, SimplifyError> {
        self.config.validate()?;
        Ok(simplify(img, &self.config, self.exec))
    }
}

/// The classic pipeline. Output is binary, one pixel wide and 8-connected.
pub fn simplify(img: &ContourImage, cfg: &SimplifierConfig, exec: Execution) -> ContourImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let blurred = morph::gaussian_blur(img.intensity(), w, h, cfg.blur_sigma, exec);
    let t = cfg.binarize_threshold as f32;
    // confidently inked pixels survive the blur so thin input lines keep
    // their ends
    let data = blurred
        .iter()
        .zip(img.intensity())
        .map(|(&b, &o)| b >= t || o >= 0.5)
        .collect();
    let mut m = morph::thin(&Mask::from_vec(w, h, data), exec);
    morph::prune_spurs(&mut m, cfg.prune_branch_length);
    if morph::bridge_gaps(&mut m, cfg.gap_close_radius) > 0 {
        m = morph::thin(&m, exec);
    }
    morph::remove_small_components(&mut m, cfg.min_component_area);
    let tags = carry_tags(img, &m, 2);
    ContourImage::from_mask(img.width(), img.height(), &m.data).with_tags(tags)
}

/// Family tags for the simplified pixels: the union of input tags within
/// Chebyshev distance `r`.
fn carry_tags(img: &ContourImage, m: &Mask, r: i64) -> Vec<u8> {
    let (w, h) = (m.width as i64, m.height as i64);
    (0..m.data.len())
        .map(|i| {
            if !m.data[i] {
                return 0;
            }
            let (x, y) = m.xy(i);
            let mut t = 0;
            for yy in (y - r).max(0)..=(y + r).min(h - 1) {
                for xx in (x - r).max(0)..=(x + r).min(w - 1) {
                    t |= img.tags()[(yy * w + xx) as usize];
                }
            }
            t
        })
        .collect()
}

/// Runs `program input.png output.png` and reads the result back.
#[derive(Debug, Clone)]
pub struct ExternalSimplifier {
    pub program: PathBuf,
}

impl Simplifier for ExternalSimplifier {
    fn simplify(&self, img: &ContourImage) -> Result<ContourImage, SimplifyError> {
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("input.png");
        let output = dir.path().join("output.png");
        std::fs::write(&input, img.to_png()?)?;
        let status = Command::new(&self.program)
            .arg(&input)
            .arg(&output)
            .status()
            .map_err(|e| SimplifyError::External(format!("{}: {e}", self.program.display())))?;
        if !status.success() {
            return Err(SimplifyError::External(format!("{} exited with {status}", self.program.display())));
        }
        let out = ContourImage::from_png(&std::fs::read(&output)?)?;
        if (out.width(), out.height()) != (img.width(), img.height()) {
            return Err(SimplifyError::SizeMismatch(out.width(), out.height(), img.width(), img.height()));
        }
        Ok(out)
    }
}

/// Fraction of predicted foreground pixels (intensity >= 0.5) that lie
/// within one pixel of reference foreground. An empty prediction scores 0.
pub fn precision_against_reference(output: &ContourImage, reference: &ContourImage) -> Result<f64, SimplifyError> {
    if (output.width(), output.height()) != (reference.width(), reference.height()) {
        return Err(SimplifyError::SizeMismatch(
            output.width(),
            output.height(),
            reference.width(),
            reference.height(),
        ));
    }
    let (w, h) = (reference.width() as usize, reference.height() as usize);
    let reference = Mask::from_vec(w, h, reference.intensity().iter().map(|&v| v >= 0.5).collect()).dilate(1);
    let predicted: Vec<usize> = (0..w * h).filter(|&i| output.intensity()[i] >= 0.5).collect();
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let tp = predicted.iter().filter(|&&i| reference.data[i]).count();
    Ok(tp as f64 / predicted.len() as f64)
}
