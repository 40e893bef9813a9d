//! Perspective rasterization of contour chains with hidden-line removal.

use super::camera::Camera;
use super::{ContourImage, ContourSet};
use crate::geom::{Vec2, Vec3};
use crate::mesh::TriangleMesh;
use crate::par::{self, Execution};

const TILE: f64 = 16.0;

/// Ray-cast visibility against the mesh, with triangles binned into screen
/// tiles so each query only tests nearby faces.
pub struct Occluder<'a> {
    mesh: &'a TriangleMesh,
    cam: Camera,
    eps: f64,
    cols: usize,
    rows: usize,
    tiles: Vec<Vec<u32>>,
    everywhere: Vec<u32>,
}

impl<'a> Occluder<'a> {
    pub fn new(mesh: &'a TriangleMesh, cam: Camera) -> Self {
        let cols = (cam.width / TILE).ceil().max(1.0) as usize;
        let rows = (cam.height / TILE).ceil().max(1.0) as usize;
        let mut tiles = vec![Vec::new(); cols * rows];
        let mut everywhere = Vec::new();
        for f in 0..mesh.faces().len() {
            let pts = mesh.face_points(f);
            let proj: Option<Vec<Vec2>> = pts.iter().map(|&p| cam.project(p).map(|q| q.0)).collect();
            let Some(proj) = proj else {
                everywhere.push(f as u32);
                continue;
            };
            let (lo, hi) = proj.iter().fold(
                (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)),
                |(lo, hi), p| (lo.inf(p), hi.sup(p)),
            );
            if hi.x < 0.0 || hi.y < 0.0 || lo.x > cam.width || lo.y > cam.height {
                continue;
            }
            let c0 = ((lo.x / TILE).floor().max(0.0) as usize).min(cols - 1);
            let c1 = ((hi.x / TILE).floor().max(0.0) as usize).min(cols - 1);
            let r0 = ((lo.y / TILE).floor().max(0.0) as usize).min(rows - 1);
            let r1 = ((hi.y / TILE).floor().max(0.0) as usize).min(rows - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    tiles[r * cols + c].push(f as u32);
                }
            }
        }
        Self {
            mesh,
            cam,
            eps: 1e-4 * mesh.diameter(),
            cols,
            rows,
            tiles,
            everywhere,
        }
    }

    /// True when no face blocks the segment from the eye to `p` by more than
    /// the depth epsilon.
    pub fn visible(&self, p: Vec3) -> bool {
        let Some((q, _)) = self.cam.project(p) else {
            return false;
        };
        let dir = p - self.cam.eye;
        let dist = dir.norm();
        if dist <= self.eps {
            return true;
        }
        let t_max = 1.0 - self.eps / dist;
        let c = ((q.x / TILE).floor().max(0.0) as usize).min(self.cols - 1);
        let r = ((q.y / TILE).floor().max(0.0) as usize).min(self.rows - 1);
        let blocked = |f: &u32| {
            let [a, b, c] = self.mesh.face_points(*f as usize);
            ray_triangle(self.cam.eye, dir, a, b, c).is_some_and(|t| t > 0.0 && t < t_max)
        };
        !(self.tiles[r * self.cols + c].iter().any(blocked) || self.everywhere.iter().any(blocked))
    }
}

/// Moller-Trumbore intersection; returns the ray parameter.
fn ray_triangle(o: Vec3, d: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pv = d.cross(&e2);
    let det = e1.dot(&pv);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() * d.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let tv = o - a;
    let u = tv.dot(&pv) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qv = tv.cross(&e1);
    let v = d.dot(&qv) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&qv) * inv)
}

/// Pixel writes produced by Xiaolin Wu's anti-aliased line algorithm, with
/// coordinates in the continuous image convention (pixel centers at +0.5).
pub(crate) fn wu_line(a: Vec2, b: Vec2, mut plot: impl FnMut(i64, i64, f64)) {
    let (mut x0, mut y0, mut x1, mut y1) = (a.x - 0.5, a.y - 0.5, b.x - 0.5, b.y - 0.5);
    let steep = (y1 - y0).abs() > (x1 - x0).abs();
    if steep {
        std::mem::swap(&mut x0, &mut y0);
        std::mem::swap(&mut x1, &mut y1);
    }
    if x0 > x1 {
        std::mem::swap(&mut x0, &mut x1);
        std::mem::swap(&mut y0, &mut y1);
    }
    let mut put = |x: i64, y: i64, c: f64| {
        if steep {
            plot(y, x, c)
        } else {
            plot(x, y, c)
        }
    };
    let dx = x1 - x0;
    let gradient = if dx.abs() < 1e-12 { 0.0 } else { (y1 - y0) / dx };
    let fpart = |v: f64| v - v.floor();
    let rfpart = |v: f64| 1.0 - fpart(v);

    let xend = x0.round();
    let yend = y0 + gradient * (xend - x0);
    // shared chain vertices are drawn at full weight
    let xgap = 1.0;
    let xpx1 = xend as i64;
    let ypx1 = yend.floor() as i64;
    put(xpx1, ypx1, rfpart(yend) * xgap);
    put(xpx1, ypx1 + 1, fpart(yend) * xgap);
    let mut intery = yend + gradient;

    let xend = x1.round();
    let yend = y1 + gradient * (xend - x1);
    let xpx2 = xend as i64;
    let ypx2 = yend.floor() as i64;
    if xpx2 == xpx1 {
        return;
    }
    put(xpx2, ypx2, rfpart(yend) * xgap);
    put(xpx2, ypx2 + 1, fpart(yend) * xgap);

    for x in (xpx1 + 1)..xpx2 {
        put(x, intery.floor() as i64, rfpart(intery));
        put(x, intery.floor() as i64 + 1, fpart(intery));
        intery += gradient;
    }
}

/// Clips the 3D segment to the half space in front of the near plane.
fn clip_near(cam: &Camera, a: Vec3, b: Vec3) -> Option<(Vec3, Vec3)> {
    let near = 1e-6;
    let (da, db) = (cam.depth(a) - near, cam.depth(b) - near);
    match (da > 0.0, db > 0.0) {
        (true, true) => Some((a, b)),
        (false, false) => None,
        (true, false) => Some((a, a + (b - a) * (da / (da - db)))),
        (false, true) => Some((a + (b - a) * (da / (da - db)), b)),
    }
}

type Plot = (usize, f32, u8);

fn draw_segment(cam: &Camera, occ: Option<&Occluder>, a: Vec3, b: Vec3, bit: u8, out: &mut Vec<Plot>) {
    let Some((a, b)) = clip_near(cam, a, b) else {
        return;
    };
    let (Some((pa, _)), Some((pb, _))) = (cam.project(a), cam.project(b)) else {
        return;
    };
    let (w, h) = (cam.width as i64, cam.height as i64);
    let mut plot = |x: i64, y: i64, c: f64| {
        if c > 0.0 && x >= 0 && y >= 0 && x < w && y < h {
            out.push(((y * w + x) as usize, c.min(1.0) as f32, bit));
        }
    };
    let Some(occ) = occ else {
        wu_line(pa, pb, &mut plot);
        return;
    };
    // sample in 3D so visibility is perspective correct; at least two
    // samples per pixel of screen length
    let steps = ((pb - pa).norm() * 2.0).ceil().max(1.0) as usize;
    let pts: Vec<(Vec2, bool)> = (0..=steps)
        .map(|k| {
            let p = a + (b - a) * (k as f64 / steps as f64);
            let q = cam.project(p).map_or(pa, |q| q.0);
            (q, occ.visible(p))
        })
        .collect();
    let mut k = 0;
    while k < pts.len() {
        if !pts[k].1 {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < pts.len() && pts[k + 1].1 {
            k += 1;
        }
        if k > start {
            wu_line(pts[start].0, pts[k].0, &mut plot);
        } else {
            plot(pts[k].0.x.floor() as i64, pts[k].0.y.floor() as i64, 1.0);
        }
        k += 1;
    }
}

/// Draws every chain with 1-px anti-aliased lines. When `mesh` is given,
/// portions hidden behind it are removed. Overlapping pixels keep the
/// maximum intensity and the union of family tags.
pub fn rasterize_contours(
    set: &ContourSet,
    mesh: Option<&TriangleMesh>,
    cam: &Camera,
    exec: Execution,
) -> ContourImage {
    let mut img = ContourImage::new(cam.width as u32, cam.height as u32);
    let occ = mesh.filter(|m| !m.is_empty()).map(|m| Occluder::new(m, *cam));
    let plots = par::map_slice(exec, &set.chains, |chain| {
        let mut out = Vec::new();
        let bit = chain.family.bit();
        let n = chain.points.len();
        let segs = if chain.closed && n > 2 { n } else { n.saturating_sub(1) };
        for s in 0..segs {
            draw_segment(cam, occ.as_ref(), chain.points[s], chain.points[(s + 1) % n], bit, &mut out);
        }
        out
    });
    for list in plots {
        for (idx, c, bit) in list {
            img.splat(idx, c, bit);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contours::{ContourChain, ContourFamily, Viewpoint};

    fn front_view() -> Camera {
        Viewpoint::new(Vec3::new(0.0, 0.0, 10.0), Vec3::zeros(), Vec3::y(), 30.0, 64, 64)
            .camera()
            .unwrap()
    }

    #[test]
    fn empty_set_is_blank() {
        let img = rasterize_contours(&ContourSet::default(), None, &front_view(), Execution::Sequential);
        assert!(img.intensity().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn axis_aligned_line_is_crisp() {
        let mut hits = Vec::new();
        wu_line(Vec2::new(2.5, 5.5), Vec2::new(9.5, 5.5), |x, y, c| hits.push((x, y, c)));
        let full: Vec<_> = hits.iter().filter(|h| h.2 > 0.99).collect();
        assert_eq!(full.len(), 8);
        assert!(full.iter().all(|h| h.1 == 5));
    }

    #[test]
    fn ray_hits_triangle() {
        let t = ray_triangle(
            Vec3::new(0.2, 0.2, 5.0),
            Vec3::new(0.0, 0.0, -10.0),
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
        );
        assert!((t.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chain_behind_camera_is_clipped() {
        let set = ContourSet {
            chains: vec![ContourChain {
                family: ContourFamily::Oc,
                points: vec![Vec3::new(0.0, 0.0, 20.0), Vec3::new(1.0, 0.0, 20.0)],
                closed: false,
            }],
        };
        let img = rasterize_contours(&set, None, &front_view(), Execution::Sequential);
        assert_eq!(img.foreground_count(0.0), 0);
    }
}
