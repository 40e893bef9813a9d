//! Geometry-based contours: occluding contours (OC), suggestive contours
//! (SC) and apparent ridges (AR), and their raster image.

mod camera;
mod curvature;
mod lines;
mod raster;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{Camera, ViewError, Viewpoint};
pub use curvature::{CurvatureError, CurvatureField, RadialField};
pub use lines::{apparent_ridges, occluding_contours, suggestive_contours};
pub use raster::{rasterize_contours, Occluder};

use crate::geom::Vec3;
use crate::imageio::{self, ImageIoError};
use crate::mesh::TriangleMesh;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContourFamily {
    #[serde(rename = "OC")]
    Oc,
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "AR")]
    Ar,
}

impl ContourFamily {
    pub const ALL: [ContourFamily; 3] = [ContourFamily::Oc, ContourFamily::Sc, ContourFamily::Ar];

    /// Bit in [`ContourImage::tags`].
    pub fn bit(self) -> u8 {
        match self {
            ContourFamily::Oc => 1,
            ContourFamily::Sc => 2,
            ContourFamily::Ar => 4,
        }
    }
}

/// A polyline in model space. Closed chains do not repeat the first point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourChain {
    pub family: ContourFamily,
    pub points: Vec<Vec3>,
    pub closed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub chains: Vec<ContourChain>,
}

impl ContourSet {
    pub fn of_family(&self, family: ContourFamily) -> impl Iterator<Item = &ContourChain> {
        self.chains.iter().filter(move |c| c.family == family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ContourParams {
    pub occluding: bool,
    pub suggestive: bool,
    pub ridges: bool,
    /// Minimum derivative of radial curvature for SC segments (1/unit²).
    pub sc_min_derivative: f64,
    /// Minimum view-dependent curvature, in units of 1/diameter, for AR.
    pub ar_min_strength: f64,
    /// AR are skipped where `n . v` is at most this value.
    pub grazing: f64,
    pub hidden_line_removal: bool,
}

impl Default for ContourParams {
    fn default() -> Self {
        Self {
            occluding: true,
            suggestive: true,
            ridges: true,
            sc_min_derivative: 0.01,
            ar_min_strength: 10.0,
            grazing: 0.1,
            hidden_line_removal: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ContourError {
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
}

/// Extracts the enabled contour families.
pub fn extract_contours(
    mesh: &TriangleMesh,
    view: &Viewpoint,
    params: &ContourParams,
    exec: Execution,
) -> Result<ContourSet, ContourError> {
    let cam = view.camera()?;
    let mut chains = Vec::new();
    if mesh.is_empty() {
        return Ok(ContourSet { chains });
    }
    if params.occluding {
        chains.extend(occluding_contours(mesh, &cam, exec));
    }
    if params.suggestive || params.ridges {
        let field = CurvatureField::compute_with(mesh, exec)?;
        if params.suggestive {
            let radial = RadialField::compute(mesh, &field, &cam, exec);
            chains.extend(suggestive_contours(mesh, &cam, &radial, params, exec));
        }
        if params.ridges {
            chains.extend(apparent_ridges(mesh, &cam, &field, params, exec));
        }
    }
    Ok(ContourSet { chains })
}

/// Extraction followed by rasterization.
pub fn render_contours(
    mesh: &TriangleMesh,
    view: &Viewpoint,
    params: &ContourParams,
    exec: Execution,
) -> Result<(ContourSet, ContourImage), ContourError> {
    let set = extract_contours(mesh, view, params, exec)?;
    let cam = view.camera()?;
    let occ = params.hidden_line_removal.then_some(mesh);
    let img = rasterize_contours(&set, occ, &cam, exec);
    Ok((set, img))
}

/// Grayscale contour raster, `1.0` meaning full ink.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourImage {
    width: u32,
    height: u32,
    intensity: Vec<f32>,
    tags: Vec<u8>,
}

impl ContourImage {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            intensity: vec![0.0; n],
            tags: vec![0; n],
        }
    }

    /// Builds an image from raw intensities, clamped to `[0, 1]`, with no tags.
    pub fn from_intensity(width: u32, height: u32, intensity: Vec<f32>) -> Self {
        assert_eq!(intensity.len(), width as usize * height as usize);
        let intensity: Vec<f32> = intensity.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self {
            width,
            height,
            tags: vec![0; intensity.len()],
            intensity,
        }
    }

    /// Binary image from a foreground mask.
    pub fn from_mask(width: u32, height: u32, mask: &[bool]) -> Self {
        Self::from_intensity(width, height, mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn intensity(&self) -> &[f32] {
        &self.intensity
    }

    /// Per-pixel family bitmask, see [`ContourFamily::bit`].
    pub fn tags(&self) -> &[u8] {
        &self.tags
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.intensity[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        self.intensity[(y * self.width + x) as usize] = v.clamp(0.0, 1.0);
    }

    /// Replaces the family tags; tags on background pixels are dropped.
    pub fn with_tags(mut self, tags: Vec<u8>) -> Self {
        assert_eq!(tags.len(), self.tags.len());
        self.tags = tags
            .into_iter()
            .zip(&self.intensity)
            .map(|(t, &v)| if v > 0.0 { t } else { 0 })
            .collect();
        self
    }

    pub(crate) fn splat(&mut self, idx: usize, c: f32, bit: u8) {
        let v = &mut self.intensity[idx];
        *v = v.max(c.clamp(0.0, 1.0));
        if c > 0.0 {
            self.tags[idx] |= bit;
        }
    }

    /// Pixels with intensity strictly above `threshold`.
    pub fn mask(&self, threshold: f32) -> Vec<bool> {
        self.intensity.iter().map(|&v| v > threshold).collect()
    }

    pub fn foreground_count(&self, threshold: f32) -> usize {
        self.intensity.iter().filter(|&&v| v > threshold).count()
    }

    /// 8-bit gray with black ink on white paper.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.intensity
            .iter()
            .map(|&v| ((1.0 - v.clamp(0.0, 1.0)) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_gray8(width: u32, height: u32, gray: &[u8]) -> Self {
        Self::from_intensity(width, height, gray.iter().map(|&g| 1.0 - g as f32 / 255.0).collect())
    }

    pub fn to_png(&self) -> Result<Vec<u8>, ImageIoError> {
        imageio::encode_gray_png(self.width, self.height, &self.to_gray8())
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, ImageIoError> {
        let (w, h, g) = imageio::decode_gray_png(bytes)?;
        Ok(Self::from_gray8(w, h, &g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cuboid, icosphere, plane_grid, rounded_box, saddle, single_triangle, torus};

    fn view_from(dir: Vec3, radius: f64) -> Viewpoint {
        Viewpoint::framing(Vec3::zeros(), radius, dir, 40.0, 128)
    }

    #[test]
    fn sphere_silhouette_is_one_loop() {
        let m = icosphere(3, 1.0);
        for dir in [Vec3::z(), Vec3::new(1.0, 2.0, 0.5), Vec3::new(-0.3, 0.1, -1.0)] {
            let cam = view_from(dir, 1.0).camera().unwrap();
            let oc = occluding_contours(&m, &cam, Execution::Sequential);
            assert_eq!(oc.len(), 1, "{dir:?}");
            assert!(oc[0].closed);
        }
    }

    #[test]
    fn torus_along_axis_gives_two_loops() {
        let m = torus(2.0, 0.6, 48, 24);
        let cam = view_from(Vec3::z(), 2.6).camera().unwrap();
        let oc = occluding_contours(&m, &cam, Execution::Sequential);
        assert_eq!(oc.len(), 2);
        assert!(oc.iter().all(|c| c.closed));
    }

    #[test]
    fn single_triangle_boundary() {
        let m = single_triangle(1.0);
        let cam = view_from(Vec3::z(), 1.0).camera().unwrap();
        let oc = occluding_contours(&m, &cam, Execution::Sequential);
        assert_eq!(oc.len(), 1);
        assert!(oc[0].closed);
        assert_eq!(oc[0].points.len(), 3);
    }

    #[test]
    fn convex_and_flat_have_no_suggestive_contours() {
        let p = ContourParams::default();
        for m in [icosphere(3, 1.0), plane_grid(20, 1.0)] {
            let view = view_from(Vec3::new(0.3, -0.4, 1.0), 1.5);
            let cam = view.camera().unwrap();
            let field = CurvatureField::compute(&m).unwrap();
            let radial = RadialField::compute(&m, &field, &cam, Execution::Sequential);
            assert!(suggestive_contours(&m, &cam, &radial, &p, Execution::Sequential).is_empty());
            assert!(apparent_ridges(&m, &cam, &field, &p, Execution::Sequential).is_empty());
        }
    }

    #[test]
    fn saddle_has_suggestive_contours() {
        let m = saddle(40, 1.0);
        let view = view_from(Vec3::new(1.0, 0.3, 1.2), 1.5);
        let set = extract_contours(&m, &view, &ContourParams::default(), Execution::Sequential).unwrap();
        assert!(set.of_family(ContourFamily::Sc).count() > 0);
    }

    #[test]
    fn modes_are_bit_identical() {
        let m = saddle(30, 1.0);
        let view = view_from(Vec3::new(1.0, 0.3, 1.2), 1.5);
        let p = ContourParams::default();
        let (sa, ia) = render_contours(&m, &view, &p, Execution::Sequential).unwrap();
        let (sb, ib) = render_contours(&m, &view, &p, Execution::Parallel).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(ia, ib);
    }

    #[test]
    fn png_round_trip_keeps_gray_levels() {
        let mut img = ContourImage::new(20, 16);
        img.set(3, 4, 1.0);
        img.set(5, 6, 0.5);
        let back = ContourImage::from_png(&img.to_png().unwrap()).unwrap();
        assert_eq!(back.width(), 20);
        assert_eq!(back.get(3, 4), 1.0);
        assert!((back.get(5, 6) - 0.5).abs() < 1.0 / 255.0);
        assert_eq!(back.get(0, 0), 0.0);
    }

    /// Fraction of 20 samples along a bevel midline that lie within the
    /// bevel radius of some ridge point.
    fn bevel_coverage(pts: &[Vec3], axis: usize, sa: f64, sb: f64, bevel: f64) -> usize {
        let inner = 1.0 - bevel;
        let s = std::f64::consts::FRAC_1_SQRT_2 * bevel;
        (0..20)
            .filter(|k| {
                let mut q = Vec3::zeros();
                q[axis] = -inner + 2.0 * inner * (*k as f64 + 0.5) / 20.0;
                q[(axis + 1) % 3] = sa * (inner + s);
                q[(axis + 2) % 3] = sb * (inner + s);
                pts.iter().any(|x| (x - q).norm() < bevel)
            })
            .count()
    }

    #[test]
    fn bevelled_cube_ridges_follow_visible_edges() {
        let bevel = 0.15;
        let m = rounded_box(1.0, bevel, 40);
        let dir = Vec3::new(1.0, -1.1, 1.2);
        let view = Viewpoint::framing(Vec3::zeros(), 1.8, dir, 40.0, 256);
        let cam = view.camera().unwrap();
        let field = CurvatureField::compute(&m).unwrap();
        let ar = apparent_ridges(&m, &cam, &field, &ContourParams::default(), Execution::Parallel);
        let pts: Vec<Vec3> = ar.iter().flat_map(|c| c.points.iter().copied()).collect();
        let mut covered = 0;
        for axis in 0..3 {
            for sa in [-1.0, 1.0] {
                for sb in [-1.0, 1.0] {
                    // an edge is visible when either adjacent face looks at the eye
                    let mut na = Vec3::zeros();
                    na[(axis + 1) % 3] = sa;
                    let mut nb = Vec3::zeros();
                    nb[(axis + 2) % 3] = sb;
                    let visible = na.dot(&dir) > 0.0 || nb.dot(&dir) > 0.0;
                    let c = bevel_coverage(&pts, axis, sa, sb, bevel);
                    if visible {
                        assert!(c >= 14, "visible edge {axis} {sa} {sb}: {c}/20");
                        covered += 1;
                    } else {
                        assert_eq!(c, 0, "hidden edge {axis} {sa} {sb}");
                    }
                }
            }
        }
        assert_eq!(covered, 9);
    }

    #[test]
    fn square_outline_has_four_sides() {
        let view = Viewpoint::new(Vec3::new(0.0, 0.0, 10.0), Vec3::zeros(), Vec3::y(), 30.0, 64, 64);
        let cam = view.camera().unwrap();
        let h = 1.0;
        let chain = ContourChain {
            family: ContourFamily::Oc,
            points: vec![
                Vec3::new(-h, -h, 0.0),
                Vec3::new(h, -h, 0.0),
                Vec3::new(h, h, 0.0),
                Vec3::new(-h, h, 0.0),
            ],
            closed: true,
        };
        let img = rasterize_contours(&ContourSet { chains: vec![chain] }, None, &cam, Execution::Sequential);
        let (a, _) = cam.project(Vec3::new(-h, h, 0.0)).unwrap();
        let (b, _) = cam.project(Vec3::new(h, -h, 0.0)).unwrap();
        let (x0, y0, x1, y1) = (a.x as u32, a.y as u32, b.x as u32, b.y as u32);
        // every pixel on each side is inked, the interior is empty
        for x in x0 + 1..x1 {
            assert!(img.get(x, y0) > 0.3 || img.get(x, y0 + 1) > 0.3);
            assert!(img.get(x, y1) > 0.3 || img.get(x, y1 - 1) > 0.3);
        }
        for y in y0 + 1..y1 {
            assert!(img.get(x0, y) > 0.3 || img.get(x0 + 1, y) > 0.3);
            assert!(img.get(x1, y) > 0.3 || img.get(x1 - 1, y) > 0.3);
        }
        for y in y0 + 3..y1 - 2 {
            for x in x0 + 3..x1 - 2 {
                assert_eq!(img.get(x, y), 0.0);
            }
        }
        assert!(img.tags().iter().zip(img.intensity()).all(|(&t, &v)| (t != 0) == (v > 0.0)));
    }

    #[test]
    fn occluding_cube_interrupts_sphere_silhouette() {
        let sphere = icosphere(3, 1.0);
        let view = Viewpoint::new(Vec3::new(0.0, 0.0, 6.0), Vec3::zeros(), Vec3::y(), 30.0, 128, 128);
        let cam = view.camera().unwrap();
        let set = ContourSet { chains: occluding_contours(&sphere, &cam, Execution::Sequential) };
        let alone = rasterize_contours(&set, Some(&sphere), &cam, Execution::Sequential);
        // a small cube between the eye and the right side of the silhouette
        let cube = cuboid(Vec3::new(0.5, 0.0, 3.0), Vec3::new(0.15, 0.15, 0.15));
        let scene = TriangleMesh::merge(&[sphere.clone(), cube.clone()]);
        let hidden = rasterize_contours(&set, Some(&scene), &cam, Execution::Sequential);
        // oracle: a silhouette pixel disappears exactly where the cube is in front
        let occ = Occluder::new(&cube, cam);
        let (mut lost, mut kept) = (0, 0);
        for chain in &set.chains {
            for p in &chain.points {
                let (q, _) = cam.project(*p).unwrap();
                let idx = q.y as usize * 128 + q.x as usize;
                if occ.visible(*p) {
                    kept += 1;
                    assert!(hidden.intensity()[idx] > 0.0);
                } else {
                    lost += 1;
                    assert!(alone.intensity()[idx] > 0.0);
                }
            }
        }
        assert!(lost > 0 && kept > 0);
        assert!(hidden.foreground_count(0.0) < alone.foreground_count(0.0));
    }

    #[test]
    fn silhouette_chains_close_on_watertight_meshes() {
        for m in [torus(2.0, 0.6, 48, 24), rounded_box(1.0, 0.2, 12), icosphere(2, 1.0)] {
            for dir in [Vec3::new(0.2, 0.7, 1.0), Vec3::new(-1.0, 0.4, 0.1)] {
                let cam = view_from(dir, 2.6).camera().unwrap();
                for c in occluding_contours(&m, &cam, Execution::Sequential) {
                    assert!(c.closed);
                }
            }
        }
    }

    #[test]
    fn small_eye_perturbation_changes_few_pixels() {
        let m = torus(2.0, 0.6, 48, 24);
        let p = ContourParams { suggestive: false, ridges: false, ..ContourParams::default() };
        let view = view_from(Vec3::new(0.3, 0.5, 1.0), 2.6);
        let mut moved = view.clone();
        moved.eye += Vec3::new(1.0, -1.0, 0.5).normalize() * (0.0009 * m.diameter());
        let (_, a) = render_contours(&m, &view, &p, Execution::Parallel).unwrap();
        let (_, b) = render_contours(&m, &moved, &p, Execution::Parallel).unwrap();
        let ma = a.mask(0.0);
        let mb = b.mask(0.0);
        let diff = ma.iter().zip(&mb).filter(|(x, y)| x != y).count();
        let total = ma.iter().filter(|&&x| x).count();
        assert!((diff as f64) < 0.1 * total as f64, "{diff} of {total}");
    }
}
