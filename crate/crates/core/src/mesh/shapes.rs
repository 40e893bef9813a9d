//! Procedural meshes used as fixtures and test surfaces.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use super::TriangleMesh;
use crate::geom::Vec3;

fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces).expect("procedural mesh is valid")
}

/// Flips all faces when the enclosed signed volume is negative.
fn orient_outward(vertices: &[Vec3], faces: &mut [[usize; 3]]) {
    let vol: f64 = faces
        .iter()
        .map(|f| vertices[f[0]].dot(&vertices[f[1]].cross(&vertices[f[2]])))
        .sum();
    if vol < 0.0 {
        for f in faces.iter_mut() {
            f.swap(1, 2);
        }
    }
}

/// Subdivided icosahedron projected onto a sphere.
///
/// `subdivisions = 4` gives the 2562-vertex sphere.
pub fn icosphere(subdivisions: usize, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let normals: Vec<Vec3> = verts.clone();
    let verts: Vec<Vec3> = verts.into_iter().map(|v| v * radius).collect();
    orient_outward(&verts, &mut faces);
    TriangleMesh::with_normals(verts, faces, normals).expect("icosphere is valid")
}

/// Regular grid over `[-half, half]^2` with heights from `height(x, y)`.
pub fn height_field(n: usize, half: f64, height: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = -half + 2.0 * half * i as f64 / n as f64;
            let y = -half + 2.0 * half * j as f64 / n as f64;
            verts.push(Vec3::new(x, y, height(x, y)));
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(verts, faces)
}

/// Flat grid in the `z = 0` plane.
pub fn plane_grid(n: usize, half: f64) -> TriangleMesh {
    height_field(n, half, |_, _| 0.0)
}

/// Saddle patch `z = x^2 - y^2`.
pub fn saddle(n: usize, half: f64) -> TriangleMesh {
    height_field(n, half, |x, y| x * x - y * y)
}

/// Open cylinder of the given radius around the z axis, `z in [0, height]`.
pub fn cylinder(radius: f64, height: f64, segments: usize, rings: usize) -> TriangleMesh {
    let mut verts = Vec::new();
    for j in 0..=rings {
        let z = height * j as f64 / rings as f64;
        for i in 0..segments {
            let a = TAU * i as f64 / segments as f64;
            verts.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let idx = |i: usize, j: usize| j * segments + (i % segments);
    let mut faces = Vec::new();
    for j in 0..rings {
        for i in 0..segments {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(verts, faces)
}

/// Torus around the z axis with tube radius `minor`.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriangleMesh {
    let mut verts = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            verts.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::new();
    for i in 0..nu {
        for j in 0..nv {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    orient_outward(&verts, &mut faces);
    build(verts, faces)
}

/// Axis-aligned box `[-half, half]^3` whose edges and corners are rounded
/// with radius `bevel`; each face is an `n x n` grid before rounding.
pub fn rounded_box(half: f64, bevel: f64, n: usize) -> TriangleMesh {
    let mut index: BTreeMap<[usize; 3], usize> = BTreeMap::new();
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    let inner = half - bevel;
    let coord = |k: usize| -1.0 + 2.0 * k as f64 / n as f64;
    let mut vid = |lat: [usize; 3], verts: &mut Vec<Vec3>| -> usize {
        *index.entry(lat).or_insert_with(|| {
            let p = Vec3::new(coord(lat[0]), coord(lat[1]), coord(lat[2])) * half;
            let q = Vec3::new(
                p.x.clamp(-inner, inner),
                p.y.clamp(-inner, inner),
                p.z.clamp(-inner, inner),
            );
            let d = p - q;
            let r = if d.norm() > 0.0 { q + d.normalize() * bevel } else { p };
            verts.push(r);
            verts.len() - 1
        })
    };
    for axis in 0..3 {
        for side in [0, n] {
            for a in 0..n {
                for b in 0..n {
                    let lat = |u: usize, v: usize| {
                        let mut l = [0; 3];
                        l[axis] = side;
                        l[(axis + 1) % 3] = u;
                        l[(axis + 2) % 3] = v;
                        l
                    };
                    let q = [
                        vid(lat(a, b), &mut verts),
                        vid(lat(a + 1, b), &mut verts),
                        vid(lat(a + 1, b + 1), &mut verts),
                        vid(lat(a, b + 1), &mut verts),
                    ];
                    let (f1, f2) = if side == n {
                        ([q[0], q[1], q[2]], [q[0], q[2], q[3]])
                    } else {
                        ([q[0], q[2], q[1]], [q[0], q[3], q[2]])
                    };
                    faces.push(f1);
                    faces.push(f2);
                }
            }
        }
    }
    orient_outward(&verts, &mut faces);
    build(verts, faces)
}

/// Closed surface of revolution about z from a profile of `(radius, z)`
/// pairs whose first and last radii are zero.
pub fn revolve(profile: &[(f64, f64)], segments: usize) -> TriangleMesh {
    assert!(profile.len() >= 3);
    let mut verts = vec![Vec3::new(0.0, 0.0, profile[0].1)];
    let rings = &profile[1..profile.len() - 1];
    for &(r, z) in rings {
        for i in 0..segments {
            let a = TAU * i as f64 / segments as f64;
            verts.push(Vec3::new(r * a.cos(), r * a.sin(), z));
        }
    }
    let top = verts.len();
    verts.push(Vec3::new(0.0, 0.0, profile[profile.len() - 1].1));
    let idx = |i: usize, j: usize| 1 + j * segments + (i % segments);
    let mut faces = Vec::new();
    for i in 0..segments {
        faces.push([0, idx(i + 1, 0), idx(i, 0)]);
    }
    for j in 0..rings.len() - 1 {
        for i in 0..segments {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let last = rings.len() - 1;
    for i in 0..segments {
        faces.push([top, idx(i, last), idx(i + 1, last)]);
    }
    // revolve is centred on the axis, so the volume sign test is valid
    orient_outward(&verts, &mut faces);
    build(verts, faces)
}

/// Closed tube along a centreline with per-point radii and capped ends.
pub fn tube(centerline: &[Vec3], radii: &[f64], segments: usize) -> TriangleMesh {
    assert!(centerline.len() >= 2 && centerline.len() == radii.len());
    let k = centerline.len();
    let tangent = |i: usize| {
        let a = centerline[i.saturating_sub(1)];
        let b = centerline[(i + 1).min(k - 1)];
        (b - a).normalize()
    };
    let t0 = tangent(0);
    let helper = if t0.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let mut normal = (helper - t0 * helper.dot(&t0)).normalize();
    let mut verts = Vec::new();
    for i in 0..k {
        let t = tangent(i);
        normal = (normal - t * normal.dot(&t)).normalize();
        let binormal = t.cross(&normal);
        for s in 0..segments {
            let a = TAU * s as f64 / segments as f64;
            verts.push(centerline[i] + (normal * a.cos() + binormal * a.sin()) * radii[i]);
        }
    }
    let start = verts.len();
    verts.push(centerline[0]);
    let end = verts.len();
    verts.push(centerline[k - 1]);
    let idx = |s: usize, i: usize| i * segments + (s % segments);
    let mut faces = Vec::new();
    for i in 0..k - 1 {
        for s in 0..segments {
            faces.push([idx(s, i), idx(s + 1, i), idx(s + 1, i + 1)]);
            faces.push([idx(s, i), idx(s + 1, i + 1), idx(s, i + 1)]);
        }
    }
    for s in 0..segments {
        faces.push([start, idx(s + 1, 0), idx(s, 0)]);
        faces.push([end, idx(s, k - 1), idx(s + 1, k - 1)]);
    }
    // orientation relative to the tube's own centroid
    let c: Vec3 = verts.iter().sum::<Vec3>() / verts.len() as f64;
    let shifted: Vec<Vec3> = verts.iter().map(|v| v - c).collect();
    orient_outward(&shifted, &mut faces);
    build(verts, faces)
}

/// Low-poly teapot: a revolved body with lid and knob, a tapered spout and
/// a looped handle. Parts interpenetrate the body as in a sculpted model.
pub fn teapot() -> TriangleMesh {
    let profile = [
        (0.0, 0.0),
        (0.8, 0.0),
        (1.05, 0.05),
        (1.3, 0.25),
        (1.45, 0.55),
        (1.5, 0.85),
        (1.42, 1.15),
        (1.25, 1.38),
        (1.0, 1.5),
        (0.8, 1.55),
        (0.78, 1.6),
        (0.6, 1.72),
        (0.35, 1.8),
        (0.12, 1.84),
        (0.14, 1.9),
        (0.2, 1.98),
        (0.12, 2.05),
        (0.0, 2.07),
    ];
    let body = revolve(&profile, 28);

    let (p0, p1, p2) = (
        Vec3::new(1.2, 0.0, 0.5),
        Vec3::new(2.0, 0.0, 0.6),
        Vec3::new(2.35, 0.0, 1.5),
    );
    let steps = 10;
    let spout_line: Vec<Vec3> = (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            p0 * (1.0 - t) * (1.0 - t) + p1 * 2.0 * t * (1.0 - t) + p2 * t * t
        })
        .collect();
    let spout_r: Vec<f64> = (0..=steps)
        .map(|i| 0.32 + (0.13 - 0.32) * i as f64 / steps as f64)
        .collect();
    let spout = tube(&spout_line, &spout_r, 10);

    let handle_steps = 14;
    let handle_line: Vec<Vec3> = (0..=handle_steps)
        .map(|i| {
            let a = (60.0 + 240.0 * i as f64 / handle_steps as f64) * PI / 180.0;
            Vec3::new(-1.5 + 0.45 * a.cos(), 0.0, 0.85 + 0.45 * a.sin())
        })
        .collect();
    let handle = tube(&handle_line, &vec![0.09; handle_steps + 1], 8);

    let merged = TriangleMesh::merge(&[body, spout, handle]);
    build(merged.vertices().to_vec(), merged.faces().to_vec())
}

/// One triangle in the `z = 0` plane facing `+z`.
pub fn single_triangle(size: f64) -> TriangleMesh {
    build(
        vec![
            Vec3::new(-size, -size, 0.0),
            Vec3::new(size, -size, 0.0),
            Vec3::new(0.0, size, 0.0),
        ],
        vec![[0, 1, 2]],
    )
}

/// Axis-aligned closed box made of 12 triangles.
pub fn cuboid(center: Vec3, half: Vec3) -> TriangleMesh {
    let mut verts = Vec::with_capacity(8);
    for k in 0..8 {
        let s = |bit: usize| if k & bit != 0 { 1.0 } else { -1.0 };
        verts.push(center + Vec3::new(s(1) * half.x, s(2) * half.y, s(4) * half.z));
    }
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let mut faces = Vec::new();
    for q in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    let shifted: Vec<Vec3> = verts.iter().map(|v| v - center).collect();
    orient_outward(&shifted, &mut faces);
    build(verts, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_sizes() {
        assert_eq!(icosphere(4, 1.0).vertices().len(), 2562);
        assert_eq!(icosphere(0, 1.0).faces().len(), 20);
    }

    #[test]
    fn closed_shapes_are_watertight_and_outward() {
        for m in [
            icosphere(2, 1.0),
            torus(2.0, 0.5, 24, 12),
            rounded_box(1.0, 0.2, 8),
            cuboid(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.5, 0.5, 0.5)),
            teapot(),
        ] {
            assert!(m.edges().iter().all(|e| e.faces.len() == 2));
            let c: Vec3 = m.vertices().iter().sum::<Vec3>() / m.vertices().len() as f64;
            let vol: f64 = (0..m.faces().len())
                .map(|f| {
                    let [a, b, cc] = m.face_points(f);
                    (a - c).dot(&(b - c).cross(&(cc - c)))
                })
                .sum();
            assert!(vol > 0.0);
        }
    }
}
