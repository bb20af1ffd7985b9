//! Pinhole camera with a rigid camera-to-world pose.
//!
//! Frames follow the computer-vision convention: camera x points right, y points
//! down and z points forward. The world frame shares that orientation for an
//! unrotated camera, so "up" in the world is `-y` (see [`UP`]).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// World up direction. Gravity points along `+y`.
pub const UP: Vec3 = Vector3::new(0.0, -1.0, 0.0);

/// Height of a world point above the `y = 0` plane.
#[inline]
pub fn elevation(p: &Vec3) -> f64 {
    -p.y
}

const ORTHO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Camera-to-world rotation.
    pub rotation: Mat3,
    /// Camera center in world coordinates.
    pub translation: Vec3,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self> {
        let cam = Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Identity-pose camera with the given intrinsics.
    pub fn from_intrinsics(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(fx, fy, cx, cy, width, height, Mat3::identity(), Vec3::zeros())
    }

    /// Square-pixel camera with horizontal field of view `fov_x` centered on the image.
    pub fn with_fov(fov_x: f64, width: u32, height: u32, rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !(fov_x > 0.0 && fov_x < std::f64::consts::PI) {
            return Err(Error::invalid(format!("fov_x must lie in (0, pi), got {fov_x}")));
        }
        let f = 0.5 * width as f64 / (0.5 * fov_x).tan();
        Self::new(
            f,
            f,
            0.5 * width as f64,
            0.5 * height as f64,
            width,
            height,
            rotation,
            translation,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::invalid(format!(
                "focal lengths must be positive: fx={}, fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera image size must be at least 1x1"));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() || !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("camera parameters must be finite"));
        }
        let r = &self.rotation;
        let err = (r.transpose() * r - Mat3::identity()).abs().max();
        if !(err <= ORTHO_TOL) {
            return Err(Error::invalid(format!("rotation is not orthonormal (error {err:.3e})")));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::invalid(format!("rotation determinant must be +1, got {det}")));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera-frame point for continuous pixel coordinates at z-depth `depth`.
    #[inline]
    pub fn unproject_camera(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth)
    }

    /// World point for continuous pixel coordinates at z-depth `depth`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        self.rotation * self.unproject_camera(u, v, depth) + self.translation
    }

    /// World point for the center of integer pixel `(u, v)`.
    #[inline]
    pub fn unproject_pixel(&self, u: u32, v: u32, depth: f64) -> Vec3 {
        self.unproject(u as f64 + 0.5, v as f64 + 0.5, depth)
    }

    /// Unit world-space viewing direction through continuous pixel coordinates.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        (self.rotation * Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)).normalize()
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    /// Continuous pixel coordinates and z-depth of a world point; `None` behind the camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let pc = self.world_to_camera(p);
        if pc.z <= 0.0 {
            return None;
        }
        Some((self.fx * pc.x / pc.z + self.cx, self.fy * pc.y / pc.z + self.cy, pc.z))
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    /// Same intrinsics scaled to a new resolution.
    pub fn resized(&self, width: u32, height: u32) -> Result<Camera> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Camera::new(
            self.fx * sx,
            self.fy * sy,
            self.cx * sx,
            self.cy * sy,
            width,
            height,
            self.rotation,
            self.translation,
        )
    }

    /// World-to-camera matrix rows `[R^T | -R^T t]`.
    pub fn world_to_camera_3x4(&self) -> [[f64; 4]; 3] {
        let rt = self.rotation.transpose();
        let t = -(rt * self.translation);
        let mut out = [[0.0; 4]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for c in 0..3 {
                row[c] = rt[(r, c)];
            }
            row[3] = t[r];
        }
        out
    }
}

/// Camera-to-world rotation for a camera at `eye` looking at `target`, image-up aligned to [`UP`].
///
/// Falls back to a world `+x` right vector when the view direction is vertical.
pub fn look_at_rotation(eye: &Vec3, target: &Vec3) -> Option<Mat3> {
    let fwd = target - eye;
    let n = fwd.norm();
    if !(n > 1e-12) {
        return None;
    }
    let fwd = fwd / n;
    let mut right = fwd.cross(&UP);
    if right.norm() < 1e-9 {
        right = Vec3::x();
        right -= fwd * fwd.dot(&right);
    }
    let right = right.normalize();
    let down = fwd.cross(&right);
    Some(Mat3::from_columns(&[right, down, fwd]))
}

/// Rotation about the world vertical axis by `yaw` followed by a pitch-up of `pitch`.
///
/// `yaw = 0, pitch = 0` looks along `+z`; positive yaw turns toward `+x`, positive pitch looks up.
pub fn yaw_pitch_rotation(yaw: f64, pitch: f64) -> Mat3 {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let ry = Mat3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rx = Mat3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
    ry * rx
}

/// JSON camera file layout: row-major 3x3 rotation and the camera center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&Camera> for CameraJson {
    fn from(c: &Camera) -> Self {
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for k in 0..3 {
                rotation[r * 3 + k] = c.rotation[(r, k)];
            }
        }
        CameraJson {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            rotation,
            translation: [c.translation.x, c.translation.y, c.translation.z],
        }
    }
}

impl TryFrom<CameraJson> for Camera {
    type Error = Error;

    fn try_from(j: CameraJson) -> Result<Self> {
        Camera::new(
            j.fx,
            j.fy,
            j.cx,
            j.cy,
            j.width,
            j.height,
            Mat3::from_row_slice(&j.rotation),
            Vec3::from_column_slice(&j.translation),
        )
    }
}

impl Serialize for Camera {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CameraJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Camera {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = CameraJson::deserialize(d)?;
        Camera::try_from(j).map_err(serde::de::Error::custom)
    }
}
