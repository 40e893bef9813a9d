//! Per-vertex principal curvatures from a one-ring quadric fit, and the
//! view-dependent quantities derived from them.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::camera::Camera;
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;
use crate::par::{self, Execution};

#[derive(Debug, Error, PartialEq)]
pub enum CurvatureError {
    #[error("mesh has {} isolated vertices (first: {:?})", .0.len(), .0.first())]
    IsolatedVertices(Vec<usize>),
}

/// Principal curvatures and directions at every vertex.
///
/// Curvature is positive where the surface bends away from its normal, so a
/// sphere with outward normals has `k1 = k2 = 1 / r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub dir1: Vec<Vec3>,
    pub dir2: Vec<Vec3>,
}

pub(crate) fn tangent_frame(n: Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.6 { Vec3::x() } else { Vec3::y() };
    let t1 = (helper - n * helper.dot(&n)).normalize();
    (t1, n.cross(&t1))
}

struct VertexCurvature {
    k1: f64,
    k2: f64,
    d1: Vec3,
    d2: Vec3,
}

fn fit_vertex(mesh: &TriangleMesh, i: usize, ring: &[usize]) -> VertexCurvature {
    let n = mesh.normals()[i];
    let (t1, t2) = tangent_frame(n);
    let flat = VertexCurvature {
        k1: 0.0,
        k2: 0.0,
        d1: t1,
        d2: t2,
    };
    let p = mesh.vertices()[i];
    let cols = if ring.len() >= 5 { 5 } else { 3 };
    if ring.len() < 3 {
        return flat;
    }
    let mut a = DMatrix::<f64>::zeros(ring.len(), cols);
    let mut b = DVector::<f64>::zeros(ring.len());
    for (r, &j) in ring.iter().enumerate() {
        let d = mesh.vertices()[j] - p;
        let (u, v, w) = (d.dot(&t1), d.dot(&t2), d.dot(&n));
        a[(r, 0)] = u * u;
        a[(r, 1)] = u * v;
        a[(r, 2)] = v * v;
        if cols == 5 {
            a[(r, 3)] = u;
            a[(r, 4)] = v;
        }
        b[r] = w;
    }
    let svd = a.svd(true, true);
    let Ok(coef) = svd.solve(&b, 1e-12) else {
        return flat;
    };
    let (qa, qb, qc) = (coef[0], coef[1], coef[2]);
    let (gd, ge) = if cols == 5 { (coef[3], coef[4]) } else { (0.0, 0.0) };

    // first and second fundamental forms of the height function graph
    let g = (1.0 + gd * gd + ge * ge).sqrt();
    let (e, f, gg) = (1.0 + gd * gd, gd * ge, 1.0 + ge * ge);
    let (l, m, nn) = (2.0 * qa / g, qb / g, 2.0 * qc / g);
    let det = e * gg - f * f;
    // shape operator I^-1 II
    let s11 = (gg * l - f * m) / det;
    let s12 = (gg * m - f * nn) / det;
    let s21 = (e * m - f * l) / det;
    let s22 = (e * nn - f * m) / det;
    let tr = s11 + s22;
    let dt = s11 * s22 - s12 * s21;
    let disc = (tr * tr / 4.0 - dt).max(0.0).sqrt();
    let (lo, hi) = (tr / 2.0 - disc, tr / 2.0 + disc);
    // curvature sign flips because the normal points away from the bend
    let (k1, k2) = (-lo, -hi);
    let eigvec = |lambda: f64| -> (f64, f64) {
        let r1 = (s12, lambda - s11);
        let r2 = (lambda - s22, s21);
        let n1 = r1.0.hypot(r1.1);
        let n2 = r2.0.hypot(r2.1);
        if n1.max(n2) > 1e-12 {
            if n1 >= n2 {
                r1
            } else {
                r2
            }
        } else if (s11 - lambda).abs() <= (s22 - lambda).abs() {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    };
    let (x, y) = eigvec(lo);
    let raw = t1 * x + t2 * y + n * (gd * x + ge * y);
    let tangent = raw - n * raw.dot(&n);
    let d1 = if tangent.norm() > 1e-12 && (hi - lo) > 1e-12 {
        tangent.normalize()
    } else {
        t1
    };
    let d2 = n.cross(&d1);
    VertexCurvature { k1, k2, d1, d2 }
}

impl CurvatureField {
    /// Fits `w = a u^2 + b uv + c v^2 + d u + e v` over each vertex's one ring
    /// in its tangent frame (without linear terms for rings of 3 or 4).
    pub fn compute(mesh: &TriangleMesh) -> Result<Self, CurvatureError> {
        Self::compute_with(mesh, Execution::default())
    }

    pub fn compute_with(mesh: &TriangleMesh, exec: Execution) -> Result<Self, CurvatureError> {
        let isolated = mesh.isolated_vertices();
        if !isolated.is_empty() {
            return Err(CurvatureError::IsolatedVertices(isolated));
        }
        let rings = mesh.vertex_neighbors();
        let per = par::map_range(exec, mesh.vertices().len(), |i| fit_vertex(mesh, i, &rings[i]));
        let mut field = CurvatureField {
            k1: Vec::with_capacity(per.len()),
            k2: Vec::with_capacity(per.len()),
            dir1: Vec::with_capacity(per.len()),
            dir2: Vec::with_capacity(per.len()),
        };
        for v in per {
            field.k1.push(v.k1);
            field.k2.push(v.k2);
            field.dir1.push(v.d1);
            field.dir2.push(v.d2);
        }
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.k1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k1.is_empty()
    }
}

/// Gradient of a piecewise-linear vertex function inside face `f`.
pub(crate) fn face_gradient(mesh: &TriangleMesh, f: usize, values: [f64; 3]) -> Vec3 {
    let [p0, p1, p2] = mesh.face_points(f);
    let cross = (p1 - p0).cross(&(p2 - p0));
    let area2 = cross.norm();
    if area2 == 0.0 {
        return Vec3::zeros();
    }
    let n = cross / area2;
    ((values[1] - values[0]) * n.cross(&(p0 - p2)) + (values[2] - values[0]) * n.cross(&(p1 - p0)))
        / area2
}

/// Area-weighted average of incident face gradients, projected onto each
/// vertex's tangent plane.
pub(crate) fn vertex_gradients(mesh: &TriangleMesh, values: &[f64], exec: Execution) -> Vec<Vec3> {
    let vf = mesh.vertex_faces();
    par::map_range(exec, mesh.vertices().len(), |v| {
        let mut acc = Vec3::zeros();
        let mut wsum = 0.0;
        for &f in &vf[v] {
            let [a, b, c] = mesh.faces()[f];
            let w = mesh.face_cross(f).norm();
            acc += face_gradient(mesh, f, [values[a], values[b], values[c]]) * w;
            wsum += w;
        }
        if wsum == 0.0 {
            return Vec3::zeros();
        }
        let g = acc / wsum;
        let n = mesh.normals()[v];
        g - n * g.dot(&n)
    })
}

/// Radial curvature and its derivative along the projected view direction.
#[derive(Debug, Clone)]
pub struct RadialField {
    /// Normal curvature in the direction of the view vector projected onto
    /// the tangent plane.
    pub kr: Vec<f64>,
    /// Derivative of `kr` along the unit projected view direction.
    pub dkr: Vec<f64>,
    /// `n . v` with `v` the unit vector towards the eye.
    pub ndotv: Vec<f64>,
}

impl RadialField {
    pub fn compute(mesh: &TriangleMesh, field: &CurvatureField, cam: &Camera, exec: Execution) -> Self {
        let nv = mesh.vertices().len();
        let dirs: Vec<(f64, f64, Vec3)> = par::map_range(exec, nv, |i| {
            let p = mesh.vertices()[i];
            let n = mesh.normals()[i];
            let v = cam.to_eye(p);
            let w = v - n * v.dot(&n);
            let ndotv = n.dot(&v);
            if w.norm() < 1e-9 {
                return (0.5 * (field.k1[i] + field.k2[i]), ndotv, Vec3::zeros());
            }
            let w = w.normalize();
            let c = w.dot(&field.dir1[i]);
            let s = w.dot(&field.dir2[i]);
            (field.k1[i] * c * c + field.k2[i] * s * s, ndotv, w)
        });
        let kr: Vec<f64> = dirs.iter().map(|d| d.0).collect();
        let grads = vertex_gradients(mesh, &kr, exec);
        let dkr = dirs.iter().zip(&grads).map(|(d, g)| g.dot(&d.2)).collect();
        let ndotv = dirs.iter().map(|d| d.1).collect();
        Self { kr, dkr, ndotv }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cylinder, icosphere, plane_grid};

    #[test]
    fn unit_sphere_curvature_is_one() {
        let m = icosphere(4, 1.0);
        assert_eq!(m.vertices().len(), 2562);
        let f = CurvatureField::compute(&m).unwrap();
        for i in 0..f.len() {
            assert!((f.k1[i] - 1.0).abs() < 0.05, "k1[{i}] = {}", f.k1[i]);
            assert!((f.k2[i] - 1.0).abs() < 0.05, "k2[{i}] = {}", f.k2[i]);
            assert!(f.k1[i] >= f.k2[i]);
        }
    }

    #[test]
    fn plane_is_flat() {
        let m = plane_grid(10, 1.0);
        let f = CurvatureField::compute(&m).unwrap();
        assert!(f.k1.iter().chain(&f.k2).all(|k| k.abs() < 1e-6));
    }

    #[test]
    fn cylinder_radius_two() {
        // analytic: k1 = 1/r along the circumference, k2 = 0 along the axis
        let m = cylinder(2.0, 8.0, 64, 32);
        let f = CurvatureField::compute(&m).unwrap();
        let mut checked = 0;
        for (i, p) in m.vertices().iter().enumerate() {
            if p.z < 1.0 || p.z > 7.0 {
                continue;
            }
            checked += 1;
            assert!((f.k1[i] - 0.5).abs() < 0.025, "k1 = {}", f.k1[i]);
            assert!(f.k2[i].abs() < 0.025, "k2 = {}", f.k2[i]);
            // principal direction of maximum curvature is horizontal
            assert!(f.dir1[i].z.abs() < 0.05);
        }
        assert!(checked > 100);
    }

    #[test]
    fn directions_are_tangent_and_orthogonal() {
        let m = crate::mesh::torus(2.0, 0.7, 40, 20);
        let f = CurvatureField::compute(&m).unwrap();
        for i in 0..f.len() {
            let n = m.normals()[i];
            assert!(f.dir1[i].dot(&n).abs() < 1e-4);
            assert!(f.dir2[i].dot(&n).abs() < 1e-4);
            assert!(f.dir1[i].dot(&f.dir2[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn isolated_vertices_rejected() {
        let mut v = crate::mesh::single_triangle(1.0).vertices().to_vec();
        v.push(Vec3::new(5.0, 5.0, 5.0));
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert_eq!(
            CurvatureField::compute(&m).unwrap_err(),
            CurvatureError::IsolatedVertices(vec![3])
        );
    }

    #[test]
    fn face_gradient_of_linear_function() {
        let m = plane_grid(2, 1.0);
        let vals = m.faces()[0].map(|v| 3.0 * m.vertices()[v].x - 2.0 * m.vertices()[v].y);
        let g = face_gradient(&m, 0, vals);
        assert!((g - Vec3::new(3.0, -2.0, 0.0)).norm() < 1e-12);
    }
}
