//! Occluding contours, suggestive contours and apparent ridges as 3D
//! polyline chains.

use std::collections::BTreeMap;

use super::camera::Camera;
use super::curvature::{tangent_frame, vertex_gradients, face_gradient, CurvatureField, RadialField};
use super::{ContourChain, ContourFamily, ContourParams};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::par::{self, Execution};

/// Joins segments that share node keys into chains. Walks continue through
/// nodes of even degree and stop at nodes of odd degree, so a graph where
/// every node has even degree (a silhouette of a closed mesh) decomposes
/// entirely into closed chains.
pub(crate) fn chain_segments<K: Ord + Copy>(
    segs: &[(K, K)],
    pos: &BTreeMap<K, Vec3>,
) -> Vec<(Vec<Vec3>, bool)> {
    let mut adj: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    let mut used = vec![false; segs.len()];
    for (i, &(a, b)) in segs.iter().enumerate() {
        if a == b {
            used[i] = true;
            continue;
        }
        adj.entry(a).or_default().push(i);
        adj.entry(b).or_default().push(i);
    }
    let other = |s: usize, k: K| if segs[s].0 == k { segs[s].1 } else { segs[s].0 };
    let walk = |start: K, first: usize, used: &mut Vec<bool>| -> (Vec<Vec3>, K) {
        let mut pts = vec![pos[&start]];
        let (mut cur, mut seg) = (start, first);
        loop {
            used[seg] = true;
            let next = other(seg, cur);
            pts.push(pos[&next]);
            let inc = &adj[&next];
            if inc.len() % 2 == 1 {
                return (pts, next);
            }
            match inc.iter().find(|&&s| !used[s]) {
                Some(&s) => {
                    cur = next;
                    seg = s;
                }
                None => return (pts, next),
            }
        }
    };
    let mut out = Vec::new();
    for (&k, inc) in &adj {
        if inc.len() % 2 == 0 {
            continue;
        }
        for &s in inc {
            if !used[s] {
                let (pts, _) = walk(k, s, &mut used);
                out.push((pts, false));
            }
        }
    }
    for s in 0..segs.len() {
        if used[s] {
            continue;
        }
        let start = segs[s].0;
        let (mut pts, end) = walk(start, s, &mut used);
        let closed = end == start;
        if closed {
            pts.pop();
        }
        out.push((pts, closed));
    }
    out
}

fn front_facing(mesh: &TriangleMesh, cam: &Camera, f: usize) -> bool {
    mesh.face_cross(f).dot(&(cam.eye - mesh.face_centroid(f))) > 0.0
}

/// Mesh edges where the facing of the two incident faces differs, plus
/// boundary edges of front-facing faces.
pub fn occluding_contours(mesh: &TriangleMesh, cam: &Camera, exec: Execution) -> Vec<ContourChain> {
    if mesh.is_empty() {
        return Vec::new();
    }
    let front = par::map_range(exec, mesh.faces().len(), |f| front_facing(mesh, cam, f));
    let mut segs = Vec::new();
    for e in mesh.edges() {
        let hit = match e.faces.len() {
            1 => front[e.faces[0]],
            _ => {
                let n_front = e.faces.iter().filter(|&&f| front[f]).count();
                n_front > 0 && n_front < e.faces.len()
            }
        };
        if hit {
            segs.push((e.v[0], e.v[1]));
        }
    }
    let pos: BTreeMap<usize, Vec3> = segs
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .map(|v| (v, mesh.vertices()[v]))
        .collect();
    chain_segments(&segs, &pos)
        .into_iter()
        .map(|(points, closed)| ContourChain {
            family: ContourFamily::Oc,
            points,
            closed,
        })
        .collect()
}

type EdgeKey = (usize, usize);

/// A zero crossing on one face edge: key, position and the (i, j, t) local
/// interpolation parameters so callers can interpolate other fields.
struct Crossing {
    key: EdgeKey,
    pos: Vec3,
    lerp: (usize, usize, f64),
}

/// Zero crossings of a per-vertex scalar inside one triangle. Values of
/// exactly zero count as positive. Returns `None` unless there are exactly
/// two crossings.
fn face_zero_crossing(mesh: &TriangleMesh, f: usize, vals: [f64; 3]) -> Option<[Crossing; 2]> {
    let tri = mesh.faces()[f];
    let mut hits: Vec<Crossing> = Vec::with_capacity(2);
    for k in 0..3 {
        let (i, j) = (k, (k + 1) % 3);
        let (va, vb) = (vals[i], vals[j]);
        if (va < 0.0) != (vb < 0.0) {
            // interpolate from the lower vertex index so both faces agree
            let (lo, hi) = if tri[i] < tri[j] { (i, j) } else { (j, i) };
            let t = vals[lo] / (vals[lo] - vals[hi]);
            let (pa, pb) = (mesh.vertices()[tri[lo]], mesh.vertices()[tri[hi]]);
            hits.push(Crossing {
                key: (tri[lo], tri[hi]),
                pos: pa + (pb - pa) * t,
                lerp: (lo, hi, t),
            });
        }
    }
    let b = hits.pop()?;
    let a = hits.pop()?;
    hits.is_empty().then_some([a, b])
}

fn lerp(vals: [f64; 3], c: &Crossing) -> f64 {
    let (i, j, t) = c.lerp;
    vals[i] + (vals[j] - vals[i]) * t
}

fn chains_from_crossings(family: ContourFamily, segs: Vec<[Crossing; 2]>) -> Vec<ContourChain> {
    let mut pos = BTreeMap::new();
    let mut keys = Vec::with_capacity(segs.len());
    for [a, b] in segs {
        pos.insert(a.key, a.pos);
        pos.insert(b.key, b.pos);
        keys.push((a.key, b.key));
    }
    chain_segments(&keys, &pos)
        .into_iter()
        .map(|(points, closed)| ContourChain { family, points, closed })
        .collect()
}

/// Zero crossings of radial curvature on front-facing faces where the
/// derivative along the view direction exceeds `sc_min_derivative`.
pub fn suggestive_contours(
    mesh: &TriangleMesh,
    cam: &Camera,
    radial: &RadialField,
    params: &ContourParams,
    exec: Execution,
) -> Vec<ContourChain> {
    let segs = par::flat_map_range(exec, mesh.faces().len(), |f| {
        if !front_facing(mesh, cam, f) {
            return Vec::new();
        }
        let tri = mesh.faces()[f];
        let kr = tri.map(|v| radial.kr[v]);
        let Some(cr) = face_zero_crossing(mesh, f, kr) else {
            return Vec::new();
        };
        let dkr = tri.map(|v| radial.dkr[v]);
        let d = 0.5 * (lerp(dkr, &cr[0]) + lerp(dkr, &cr[1]));
        if d > params.sc_min_derivative {
            vec![cr]
        } else {
            Vec::new()
        }
    });
    chains_from_crossings(ContourFamily::Sc, segs)
}

/// Per-vertex view-dependent curvature: largest singular value `q1` of the
/// map from screen displacement to normal change, and the tangent vector
/// `x` that a unit screen step along the maximizing direction corresponds to.
struct ViewCurvature {
    q1: Vec<f64>,
    x: Vec<Vec3>,
    valid: Vec<bool>,
}

fn view_curvature(
    mesh: &TriangleMesh,
    cam: &Camera,
    field: &CurvatureField,
    grazing: f64,
    exec: Execution,
) -> ViewCurvature {
    let per = par::map_range(exec, mesh.vertices().len(), |i| {
        let p = mesh.vertices()[i];
        let n = mesh.normals()[i];
        let v = cam.to_eye(p);
        let ndotv = n.dot(&v);
        // screen basis orthogonal to the view ray
        let mut s1 = cam.right - v * cam.right.dot(&v);
        if s1.norm() < 1e-9 {
            s1 = tangent_frame(v).0;
        }
        let s1 = s1.normalize();
        let s2 = v.cross(&s1);
        let (d1, d2) = (field.dir1[i], field.dir2[i]);
        // P maps tangent coordinates (d1, d2) to screen coordinates (s1, s2)
        let (p11, p12, p21, p22) = (d1.dot(&s1), d2.dot(&s1), d1.dot(&s2), d2.dot(&s2));
        let det = p11 * p22 - p12 * p21;
        if det.abs() < 1e-9 {
            return (0.0, Vec3::zeros(), false);
        }
        let inv = [[p22 / det, -p12 / det], [-p21 / det, p11 / det]];
        let (k1, k2) = (field.k1[i], field.k2[i]);
        let q = [[k1 * inv[0][0], k1 * inv[0][1]], [k2 * inv[1][0], k2 * inv[1][1]]];
        // eigen-decomposition of Q^T Q
        let a = q[0][0] * q[0][0] + q[1][0] * q[1][0];
        let b = q[0][0] * q[0][1] + q[1][0] * q[1][1];
        let c = q[0][1] * q[0][1] + q[1][1] * q[1][1];
        let half_tr = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let lmax = half_tr + disc;
        let t = if b.abs() > 1e-14 {
            (b, lmax - a)
        } else if a >= c {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let tn = t.0.hypot(t.1);
        let t = (t.0 / tn, t.1 / tn);
        let u = (inv[0][0] * t.0 + inv[0][1] * t.1, inv[1][0] * t.0 + inv[1][1] * t.1);
        (lmax.max(0.0).sqrt(), d1 * u.0 + d2 * u.1, ndotv > grazing)
    });
    ViewCurvature {
        q1: per.iter().map(|p| p.0).collect(),
        x: per.iter().map(|p| p.1).collect(),
        valid: per.iter().map(|p| p.2).collect(),
    }
}

/// Loci where the view-dependent curvature is maximal along its principal
/// screen direction, kept where `q1 * diameter >= ar_min_strength`.
pub fn apparent_ridges(
    mesh: &TriangleMesh,
    cam: &Camera,
    field: &CurvatureField,
    params: &ContourParams,
    exec: Execution,
) -> Vec<ContourChain> {
    if mesh.is_empty() {
        return Vec::new();
    }
    let vc = view_curvature(mesh, cam, field, params.grazing, exec);
    let grads = vertex_gradients(mesh, &vc.q1, exec);
    let dq: Vec<f64> = grads.iter().zip(&vc.x).map(|(g, x)| g.dot(x)).collect();
    let threshold = params.ar_min_strength / mesh.diameter();
    let segs = par::flat_map_range(exec, mesh.faces().len(), |f| {
        let tri = mesh.faces()[f];
        if !tri.iter().all(|&v| vc.valid[v]) || !front_facing(mesh, cam, f) {
            return Vec::new();
        }
        // align the sign-ambiguous maximum directions with the first vertex
        let x0 = vc.x[tri[0]];
        let sign = tri.map(|v| if vc.x[v].dot(&x0) < 0.0 { -1.0 } else { 1.0 });
        let d = [0, 1, 2].map(|k| dq[tri[k]] * sign[k]);
        let Some(cr) = face_zero_crossing(mesh, f, d) else {
            return Vec::new();
        };
        let q = tri.map(|v| vc.q1[v]);
        if lerp(q, &cr[0]).min(lerp(q, &cr[1])) < threshold {
            return Vec::new();
        }
        // a maximum: the derivative decreases along the direction
        let xs: Vec3 = (0..3).map(|k| vc.x[tri[k]] * sign[k]).sum();
        if face_gradient(mesh, f, d).dot(&xs) >= 0.0 {
            return Vec::new();
        }
        vec![cr]
    });
    // Near the contour the view-dependent curvature can keep rising up to
    // the grazing cutoff; strongly curved surface there is a ridge in the
    // limit, traced along the cutoff itself.
    let kmax: Vec<f64> = (0..mesh.vertices().len())
        .map(|v| field.k1[v].abs().max(field.k2[v].abs()))
        .collect();
    let ndotv: Vec<f64> = (0..mesh.vertices().len())
        .map(|v| mesh.normals()[v].dot(&cam.to_eye(mesh.vertices()[v])))
        .collect();
    let rim = par::flat_map_range(exec, mesh.faces().len(), |f| {
        let tri = mesh.faces()[f];
        let g = tri.map(|v| ndotv[v] - params.grazing);
        let Some(cr) = face_zero_crossing(mesh, f, g) else {
            return Vec::new();
        };
        let k = tri.iter().map(|&v| kmax[v]).fold(0.0, f64::max);
        let q = tri.map(|v| vc.q1[v]);
        if k < threshold || lerp(q, &cr[0]).min(lerp(q, &cr[1])) < threshold {
            return Vec::new();
        }
        // q1 must still be increasing towards the contour
        if face_gradient(mesh, f, q).dot(&face_gradient(mesh, f, g)) >= 0.0 {
            return Vec::new();
        }
        vec![cr]
    });
    let mut chains = chains_from_crossings(ContourFamily::Ar, segs);
    chains.extend(chains_from_crossings(ContourFamily::Ar, rim));
    chains
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(n: usize) -> BTreeMap<usize, Vec3> {
        (0..n).map(|i| (i, Vec3::new(i as f64, 0.0, 0.0))).collect()
    }

    #[test]
    fn open_path_is_one_chain() {
        let c = chain_segments(&[(2, 1), (0, 1), (2, 3)], &pos(4));
        assert_eq!(c.len(), 1);
        assert!(!c[0].1);
        assert_eq!(c[0].0.len(), 4);
    }

    #[test]
    fn figure_eight_closes() {
        // two triangles sharing node 0
        let c = chain_segments(&[(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)], &pos(5));
        assert!(c.iter().all(|(_, closed)| *closed));
        assert_eq!(c.iter().map(|(p, _)| p.len()).sum::<usize>(), 6);
    }

    #[test]
    fn t_junction_gives_three_chains() {
        let c = chain_segments(&[(0, 1), (1, 2), (1, 3)], &pos(4));
        assert_eq!(c.len(), 3);
    }
}
