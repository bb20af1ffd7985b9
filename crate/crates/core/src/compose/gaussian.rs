use nalgebra::{Matrix2, Matrix2x3, Quaternion, UnitQuaternion, Vector2};

use crate::compose::{composite_masked, PixelEntry, PixelGaussianList};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Mat3, RgbImage, Vec3};

/// Anisotropic 3D Gaussian with view-independent color.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: Vec3,
    /// Standard deviations along the local axes.
    pub scale: Vec3,
    /// Unit quaternion `(w, x, y, z)` rotating local axes into the world.
    pub rotation: [f64; 4],
    pub opacity: f64,
    pub color: [f64; 3],
}

impl Gaussian {
    pub fn rotation_matrix(&self) -> Mat3 {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
            .to_rotation_matrix()
            .into_inner()
    }

    /// `R S S^T R^T`.
    pub fn covariance(&self) -> Mat3 {
        let r = self.rotation_matrix();
        let s = Mat3::from_diagonal(&self.scale);
        r * s * s.transpose() * r.transpose()
    }
}

/// Screen-space footprint of a projected Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    /// Pixel coordinates of the projected mean.
    pub center: [f64; 2],
    pub cov: Matrix2<f64>,
    pub depth: f64,
    /// Pixel radius covering three standard deviations.
    pub radius: f64,
}

/// Screen-space dilation added to every projected covariance, pixels squared.
const LOW_PASS: f64 = 0.3;

/// Local affine (EWA) projection of a Gaussian; `None` behind the camera.
pub fn project_gaussian(g: &Gaussian, cam: &Camera) -> Option<Splat> {
    let w = cam.rotation.transpose();
    let p = w * (g.mean - cam.translation);
    if p.z <= 1e-6 {
        return None;
    }
    let j = Matrix2x3::new(
        cam.fx / p.z,
        0.0,
        -cam.fx * p.x / (p.z * p.z),
        0.0,
        cam.fy / p.z,
        -cam.fy * p.y / (p.z * p.z),
    );
    let cov = j * w * g.covariance() * w.transpose() * j.transpose() + Matrix2::identity() * LOW_PASS;
    let mid = 0.5 * (cov[(0, 0)] + cov[(1, 1)]);
    let det = cov.determinant();
    let lambda = mid + (mid * mid - det).max(0.0).sqrt();
    Some(Splat {
        center: [cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy],
        cov,
        depth: p.z,
        radius: 3.0 * lambda.sqrt(),
    })
}

/// Renders Gaussians with per-Gaussian masks; returns the image and per-pixel final
/// transmittance.
pub fn render_gaussians(gaussians: &[Gaussian], masks: &[f64], cam: &Camera) -> Result<(RgbImage, Vec<f64>)> {
    if masks.len() != gaussians.len() {
        return Err(Error::dims(gaussians.len(), masks.len()));
    }
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut lists: Vec<Vec<PixelEntry>> = vec![Vec::new(); w * h];
    for (g, &m) in gaussians.iter().zip(masks) {
        let Some(s) = project_gaussian(g, cam) else { continue };
        let Some(conic) = s.cov.try_inverse() else { continue };
        let x0 = (s.center[0] - s.radius).floor().max(0.0) as usize;
        let y0 = (s.center[1] - s.radius).floor().max(0.0) as usize;
        let x1 = ((s.center[0] + s.radius).ceil().max(0.0) as usize).min(w);
        let y1 = ((s.center[1] + s.radius).ceil().max(0.0) as usize).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                let d = Vector2::new(x as f64 + 0.5 - s.center[0], y as f64 + 0.5 - s.center[1]);
                let a = (g.opacity * (-0.5 * d.dot(&(conic * d))).exp()).min(0.99);
                if a < 1.0 / 255.0 {
                    continue;
                }
                lists[y * w + x].push(PixelEntry {
                    depth: s.depth,
                    opacity: a,
                    color: g.color,
                    mask: m,
                });
            }
        }
    }
    let mut img = RgbImage::new(cam.width, cam.height);
    let mut trans = vec![1.0; w * h];
    for (i, entries) in lists.into_iter().enumerate() {
        let (c, t) = composite_masked(&PixelGaussianList::new(entries));
        img.pixels[i] = c;
        trans[i] = t;
    }
    Ok((img, trans))
}

/// Mean over Gaussians of `max(s_max / s_min - r_cap, 0)`.
pub fn scale_regularization(gaussians: &[Gaussian], r_cap: f64) -> f64 {
    if gaussians.is_empty() {
        return 0.0;
    }
    gaussians
        .iter()
        .map(|g| {
            let hi = g.scale.max();
            let lo = g.scale.min().max(1e-12);
            (hi / lo - r_cap).max(0.0)
        })
        .sum::<f64>()
        / gaussians.len() as f64
}
