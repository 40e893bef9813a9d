//! Indexed triangle meshes, Wavefront OBJ I/O and edge topology.

mod shapes;

pub use shapes::*;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {0} has zero area")]
    DegenerateFace(usize),
    #[error("vertex normal {0} is not unit length")]
    BadNormal(usize),
    #[error("normal count {normals} does not match vertex count {vertices}")]
    NormalCount { normals: usize, vertices: usize },
    #[error("vertices {0:?} are not referenced by any face")]
    IsolatedVertices(Vec<usize>),
    #[error("OBJ line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// An indexed triangle list with unit vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
}

/// An undirected mesh edge and the faces that share it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub v: [usize; 2],
    pub faces: Vec<usize>,
}

impl TriangleMesh {
    /// Builds a mesh and computes area-weighted vertex normals.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        check_faces(&vertices, &faces)?;
        let normals = area_weighted_normals(&vertices, &faces);
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    /// Builds a mesh with caller-supplied normals, which must be unit length.
    pub fn with_normals(
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        normals: Vec<Vec3>,
    ) -> Result<Self, MeshError> {
        check_faces(&vertices, &faces)?;
        if normals.len() != vertices.len() {
            return Err(MeshError::NormalCount {
                normals: normals.len(),
                vertices: vertices.len(),
            });
        }
        if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-6) {
            return Err(MeshError::BadNormal(i));
        }
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            normals: Vec::new(),
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_points(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal; its length is twice the face area.
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_points(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_cross(f).normalize()
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_points(f);
        (a + b + c) / 3.0
    }

    /// Bounding-box diagonal, used as the scene scale.
    pub fn diameter(&self) -> f64 {
        match self.bounds() {
            Some((lo, hi)) => (hi - lo).norm(),
            None => 0.0,
        }
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))),
        )
    }

    /// Vertices not referenced by any face.
    pub fn isolated_vertices(&self) -> Vec<usize> {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                used[v] = true;
            }
        }
        used.iter()
            .enumerate()
            .filter(|(_, u)| !**u)
            .map(|(i, _)| i)
            .collect()
    }

    /// Unique undirected edges in a deterministic order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        map.into_iter()
            .map(|((a, b), faces)| Edge { v: [a, b], faces })
            .collect()
    }

    /// Sorted one-ring neighbour lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                nb[a].push(b);
                nb[b].push(a);
            }
        }
        for list in &mut nb {
            list.sort_unstable();
            list.dedup();
        }
        nb
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v].push(fi);
            }
        }
        vf
    }

    /// Concatenates meshes, keeping each part's normals.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh::empty();
        for m in parts {
            let base = out.vertices.len();
            out.vertices.extend_from_slice(&m.vertices);
            out.normals.extend_from_slice(&m.normals);
            out.faces
                .extend(m.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
        }
        out
    }

    /// Parses the `v`, `vn` and `f` subset of Wavefront OBJ.
    ///
    /// Polygons are fan-triangulated and zero-area triangles are dropped.
    /// Normals referenced by faces are attached to the corresponding
    /// vertices; vertices without one get area-weighted normals.
    pub fn from_obj(text: &str) -> Result<Self, MeshError> {
        let mut vertices = Vec::new();
        let mut file_normals = Vec::new();
        let mut faces = Vec::new();
        let mut assigned: BTreeMap<usize, usize> = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            let mut it = content.split_whitespace();
            let Some(tag) = it.next() else { continue };
            match tag {
                "v" | "vn" => {
                    let vals: Vec<f64> = it
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| MeshError::Parse {
                            line,
                            msg: e.to_string(),
                        })?;
                    if vals.len() != 3 {
                        return Err(MeshError::Parse {
                            line,
                            msg: format!("expected 3 coordinates after `{tag}`"),
                        });
                    }
                    let p = Vec3::new(vals[0], vals[1], vals[2]);
                    if tag == "v" {
                        vertices.push(p);
                    } else {
                        file_normals.push(p);
                    }
                }
                "f" => {
                    let mut poly = Vec::new();
                    for tok in it {
                        let mut parts = tok.split('/');
                        let vi = resolve_index(parts.next(), vertices.len(), line)?
                            .ok_or_else(|| MeshError::Parse {
                                line,
                                msg: "face vertex without index".into(),
                            })?;
                        let _tex = parts.next();
                        let ni = resolve_index(parts.next(), file_normals.len(), line)?;
                        if let Some(ni) = ni {
                            assigned.insert(vi, ni);
                        }
                        poly.push(vi);
                    }
                    if poly.len() < 3 {
                        return Err(MeshError::Parse {
                            line,
                            msg: "face with fewer than 3 vertices".into(),
                        });
                    }
                    for k in 1..poly.len() - 1 {
                        faces.push([poly[0], poly[k], poly[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        let before = faces.len();
        faces.retain(|f: &[usize; 3]| {
            let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
            (b - a).cross(&(c - a)).norm() > 0.0
        });
        if faces.len() != before {
            log::warn!("dropped {} zero-area faces", before - faces.len());
        }
        let mut normals = area_weighted_normals(&vertices, &faces);
        for (&vi, &ni) in &assigned {
            let n = file_normals[ni];
            if n.norm() > 0.0 {
                normals[vi] = n.normalize();
            }
        }
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    /// Writes `v`, `vn` and `f v//vn` records.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for n in &self.normals {
            let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
        }
        for f in &self.faces {
            let _ = writeln!(
                s,
                "f {0}//{0} {1}//{1} {2}//{2}",
                f[0] + 1,
                f[1] + 1,
                f[2] + 1
            );
        }
        s
    }
}

fn resolve_index(tok: Option<&str>, count: usize, line: usize) -> Result<Option<usize>, MeshError> {
    let Some(tok) = tok.filter(|t| !t.is_empty()) else {
        return Ok(None);
    };
    let i: i64 = tok.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("bad index `{tok}`"),
    })?;
    let idx = if i > 0 {
        i - 1
    } else if i < 0 {
        count as i64 + i
    } else {
        -1
    };
    if idx < 0 || idx as usize >= count {
        return Err(MeshError::Parse {
            line,
            msg: format!("index {i} out of range ({count} defined)"),
        });
    }
    Ok(Some(idx as usize))
}

fn check_faces(vertices: &[Vec3], faces: &[[usize; 3]]) -> Result<(), MeshError> {
    for (fi, f) in faces.iter().enumerate() {
        for &i in f {
            if i >= vertices.len() {
                return Err(MeshError::IndexOutOfRange {
                    face: fi,
                    index: i,
                    count: vertices.len(),
                });
            }
        }
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        if (b - a).cross(&(c - a)).norm() == 0.0 {
            return Err(MeshError::DegenerateFace(fi));
        }
    }
    Ok(())
}

fn area_weighted_normals(vertices: &[Vec3], faces: &[[usize; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for f in faces {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        let n = (b - a).cross(&(c - a));
        for &v in f {
            acc[v] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::z()
            }
        })
        .collect()
}
