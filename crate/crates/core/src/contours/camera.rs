use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Vec2, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum ViewError {
    #[error("eye and target coincide")]
    EyeAtTarget,
    #[error("fovY must lie in (0, 180) degrees, got {0}")]
    FieldOfView(f64),
    #[error("image must be at least 16x16 pixels, got {0}x{1}")]
    ImageSize(u32, u32),
    #[error("up vector is parallel to the viewing direction")]
    DegenerateUp,
}

/// A pinhole camera looking from `eye` at `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Viewpoint {
    pub eye: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub fov_y: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl Viewpoint {
    pub fn new(eye: Vec3, target: Vec3, up: Vec3, fov_y: f64, width: u32, height: u32) -> Self {
        Self {
            eye,
            target,
            up,
            fov_y,
            image_width: width,
            image_height: height,
        }
    }

    /// Camera on `direction` from `target`, at a distance that frames a
    /// sphere of `radius` with the given field of view.
    pub fn framing(target: Vec3, radius: f64, direction: Vec3, fov_y: f64, size: u32) -> Self {
        let dist = radius / (fov_y.to_radians() / 2.0).sin() * 1.05;
        let dir = direction.normalize();
        let up = if dir.cross(&Vec3::z()).norm() > 1e-3 {
            Vec3::z()
        } else {
            Vec3::y()
        };
        Self::new(target + dir * dist, target, up, fov_y, size, size)
    }

    pub fn validate(&self) -> Result<(), ViewError> {
        if (self.eye - self.target).norm() == 0.0 {
            return Err(ViewError::EyeAtTarget);
        }
        if !(self.fov_y > 0.0 && self.fov_y < 180.0) {
            return Err(ViewError::FieldOfView(self.fov_y));
        }
        if self.image_width < 16 || self.image_height < 16 {
            return Err(ViewError::ImageSize(self.image_width, self.image_height));
        }
        let f = (self.target - self.eye).normalize();
        if f.cross(&self.up).norm() < 1e-9 {
            return Err(ViewError::DegenerateUp);
        }
        Ok(())
    }

    pub fn camera(&self) -> Result<Camera, ViewError> {
        self.validate()?;
        let forward = (self.target - self.eye).normalize();
        let right = forward.cross(&self.up).normalize();
        let up = right.cross(&forward);
        let tan_half = (self.fov_y.to_radians() / 2.0).tan();
        Ok(Camera {
            eye: self.eye,
            forward,
            right,
            up,
            tan_half,
            aspect: self.image_width as f64 / self.image_height as f64,
            width: self.image_width as f64,
            height: self.image_height as f64,
        })
    }
}

/// Precomputed projection for a validated [`Viewpoint`].
///
/// Image coordinates are continuous: pixel `(i, j)` covers
/// `[i, i + 1) x [j, j + 1)`, with `y` growing downwards.
#[derive(Debug, Clone, Copy)]
pub struct Camera {
    pub eye: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    tan_half: f64,
    aspect: f64,
    pub width: f64,
    pub height: f64,
}

impl Camera {
    /// Distance along the viewing axis.
    pub fn depth(&self, p: Vec3) -> f64 {
        (p - self.eye).dot(&self.forward)
    }

    /// Image position and view depth; `None` behind the eye.
    pub fn project(&self, p: Vec3) -> Option<(Vec2, f64)> {
        let d = p - self.eye;
        let z = d.dot(&self.forward);
        if z <= 1e-12 {
            return None;
        }
        let xn = d.dot(&self.right) / (z * self.tan_half * self.aspect);
        let yn = d.dot(&self.up) / (z * self.tan_half);
        Some((
            Vec2::new((xn + 1.0) * 0.5 * self.width, (1.0 - yn) * 0.5 * self.height),
            z,
        ))
    }

    /// Unit vector from `p` towards the eye.
    pub fn to_eye(&self, p: Vec3) -> Vec3 {
        (self.eye - p).normalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_projects_to_center() {
        let v = Viewpoint::new(Vec3::new(0.0, 0.0, 5.0), Vec3::zeros(), Vec3::y(), 40.0, 64, 32);
        let cam = v.camera().unwrap();
        let (p, z) = cam.project(Vec3::zeros()).unwrap();
        assert!((p - Vec2::new(32.0, 16.0)).norm() < 1e-12);
        assert!((z - 5.0).abs() < 1e-12);
        // +y in the world is up in the image
        let (q, _) = cam.project(Vec3::new(0.0, 0.5, 0.0)).unwrap();
        assert!(q.y < 16.0);
        assert!(cam.project(Vec3::new(0.0, 0.0, 6.0)).is_none());
    }

    #[test]
    fn invalid_views() {
        let ok = Viewpoint::new(Vec3::new(0.0, 0.0, 5.0), Vec3::zeros(), Vec3::y(), 40.0, 64, 64);
        let mut v = ok.clone();
        v.eye = v.target;
        assert_eq!(v.validate(), Err(ViewError::EyeAtTarget));
        let mut v = ok.clone();
        v.fov_y = 180.0;
        assert!(matches!(v.validate(), Err(ViewError::FieldOfView(_))));
        let mut v = ok.clone();
        v.image_width = 8;
        assert!(matches!(v.validate(), Err(ViewError::ImageSize(8, 64))));
        let mut v = ok;
        v.up = Vec3::z();
        assert_eq!(v.validate(), Err(ViewError::DegenerateUp));
    }

    #[test]
    fn json_field_names() {
        let v = Viewpoint::new(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), Vec3::z(), 30.0, 100, 80);
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"fovY\":30.0") && s.contains("\"imageWidth\":100"));
        let back: Viewpoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
