use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{erp, Aabb, Camera, DepthMap, RgbImage, Vec3};

/// World-space points with optional per-point colors and normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    pub colors: Option<Vec<[f64; 3]>>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn from_positions(positions: Vec<Vec3>) -> Self {
        PointCloud {
            positions,
            colors: None,
            normals: None,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.positions.iter())
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Invariant("point positions must be finite".into()));
        }
        let n = self.positions.len();
        if self.colors.as_ref().is_some_and(|c| c.len() != n) || self.normals.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::Invariant("attribute arrays must match the point count".into()));
        }
        Ok(())
    }
}

/// Back-projects every valid pixel through its center `(u + 0.5, v + 0.5)`.
///
/// Depth is z-depth along the optical axis: `p = R (d K^-1 x) + t`.
pub fn backproject_depth(depth: &DepthMap, cam: &Camera) -> Result<PointCloud> {
    backproject_depth_colored(depth, cam, None, None)
}

/// As [`backproject_depth`], restricted to `mask` and sampling colors from `color`.
pub fn backproject_depth_colored(
    depth: &DepthMap,
    cam: &Camera,
    color: Option<&RgbImage>,
    mask: Option<&[bool]>,
) -> Result<PointCloud> {
    depth.same_size(cam.width, cam.height)?;
    if let Some(img) = color {
        if img.width != depth.width || img.height != depth.height {
            return Err(Error::dims(
                format!("{}x{}", depth.width, depth.height),
                format!("{}x{}", img.width, img.height),
            ));
        }
    }
    if let Some(m) = mask {
        if m.len() != depth.len() {
            return Err(Error::dims(depth.len(), m.len()));
        }
    }
    let mut positions = Vec::new();
    let mut colors = color.map(|_| Vec::new());
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = depth.index(u, v);
            if !depth.valid[i] || mask.is_some_and(|m| !m[i]) {
                continue;
            }
            positions.push(cam.unproject_pixel(u, v, depth.values[i]));
            if let (Some(cs), Some(img)) = (colors.as_mut(), color) {
                cs.push(img.pixels[i]);
            }
        }
    }
    Ok(PointCloud {
        positions,
        colors,
        normals: None,
    })
}

/// Back-projects an ERP radial-distance map from `center`, one point per valid pixel.
pub fn backproject_erp(depth: &DepthMap, center: &Vec3, color: Option<&RgbImage>) -> Result<PointCloud> {
    if depth.width != 2 * depth.height {
        return Err(Error::invalid(format!(
            "ERP depth must be 2:1, got {}x{}",
            depth.width, depth.height
        )));
    }
    if let Some(img) = color {
        if img.width != depth.width || img.height != depth.height {
            return Err(Error::dims(
                format!("{}x{}", depth.width, depth.height),
                format!("{}x{}", img.width, img.height),
            ));
        }
    }
    let mut positions = Vec::new();
    let mut colors = color.map(|_| Vec::new());
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = depth.index(u, v);
            if !depth.valid[i] {
                continue;
            }
            let dir = erp::pixel_direction(u as f64 + 0.5, v as f64 + 0.5, depth.width, depth.height);
            positions.push(center + dir * depth.values[i]);
            if let (Some(cs), Some(img)) = (colors.as_mut(), color) {
                cs.push(img.pixels[i]);
            }
        }
    }
    Ok(PointCloud {
        positions,
        colors,
        normals: None,
    })
}

/// Z-buffer splat of a point cloud into `cam`; the nearest depth wins per pixel.
///
/// `splat_radius` is in pixels: radius 1 writes only the pixel that contains the projection,
/// radius `r` writes the `(2r - 1)^2` block around it. Pixels no point reaches stay invalid.
pub fn render_depth(pc: &PointCloud, cam: &Camera, splat_radius: u32) -> DepthMap {
    let mut out = DepthMap::empty(cam.width, cam.height);
    let reach = splat_radius.max(1) as i64 - 1;
    let (w, h) = (cam.width as i64, cam.height as i64);
    for p in &pc.positions {
        let Some((u, v, z)) = cam.project(p) else { continue };
        if !u.is_finite() || !v.is_finite() {
            continue;
        }
        let (pu, pv) = (u.floor() as i64, v.floor() as i64);
        for dv in -reach..=reach {
            for du in -reach..=reach {
                let (x, y) = (pu + du, pv + dv);
                if x < 0 || y < 0 || x >= w || y >= h {
                    continue;
                }
                let i = (y * w + x) as usize;
                if !out.valid[i] || z < out.values[i] {
                    out.values[i] = z;
                    out.valid[i] = true;
                }
            }
        }
    }
    out
}

/// One point per occupied voxel at the centroid of its members.
///
/// Colors and normals are averaged (normals renormalized). Output order follows the first
/// point to land in each voxel.
pub fn voxel_downsample(pc: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(Error::invalid(format!("voxel size must be positive, got {voxel}")));
    }
    struct Acc {
        pos: Vec3,
        color: [f64; 3],
        normal: Vec3,
        count: usize,
    }
    let mut slots: HashMap<[i64; 3], usize> = HashMap::new();
    let mut accs: Vec<Acc> = Vec::new();
    for (i, p) in pc.positions.iter().enumerate() {
        let key = voxel_key(p, voxel);
        let slot = *slots.entry(key).or_insert_with(|| {
            accs.push(Acc {
                pos: Vec3::zeros(),
                color: [0.0; 3],
                normal: Vec3::zeros(),
                count: 0,
            });
            accs.len() - 1
        });
        let a = &mut accs[slot];
        a.pos += p;
        if let Some(c) = &pc.colors {
            for k in 0..3 {
                a.color[k] += c[i][k];
            }
        }
        if let Some(n) = &pc.normals {
            a.normal += n[i];
        }
        a.count += 1;
    }
    let positions = accs.iter().map(|a| a.pos / a.count as f64).collect();
    let colors = pc
        .colors
        .as_ref()
        .map(|_| accs.iter().map(|a| a.color.map(|c| c / a.count as f64)).collect());
    let normals = pc.normals.as_ref().map(|_| {
        accs.iter()
            .map(|a| {
                let n = a.normal.norm();
                if n > 1e-12 {
                    a.normal / n
                } else {
                    Vec3::zeros()
                }
            })
            .collect()
    });
    Ok(PointCloud {
        positions,
        colors,
        normals,
    })
}

#[inline]
pub(crate) fn voxel_key(p: &Vec3, voxel: f64) -> [i64; 3] {
    [
        (p.x / voxel).floor() as i64,
        (p.y / voxel).floor() as i64,
        (p.z / voxel).floor() as i64,
    ]
}

/// Concatenates `reference` followed by each extra cloud, preserving order.
///
/// An attribute survives only when every input carries it.
pub fn merge_pointclouds(reference: &PointCloud, extras: &[PointCloud]) -> PointCloud {
    let all = std::iter::once(reference).chain(extras.iter());
    let keep_colors = all.clone().all(|c| c.colors.is_some() || c.is_empty());
    let keep_normals = all.clone().all(|c| c.normals.is_some() || c.is_empty());
    let mut out = PointCloud {
        positions: Vec::with_capacity(all.clone().map(|c| c.len()).sum()),
        colors: (keep_colors && reference.colors.is_some()).then(Vec::new),
        normals: (keep_normals && reference.normals.is_some()).then(Vec::new),
    };
    for c in all {
        out.positions.extend_from_slice(&c.positions);
        if let (Some(dst), Some(src)) = (out.colors.as_mut(), c.colors.as_ref()) {
            dst.extend_from_slice(src);
        }
        if let (Some(dst), Some(src)) = (out.normals.as_mut(), c.normals.as_ref()) {
            dst.extend_from_slice(src);
        }
    }
    out
}
