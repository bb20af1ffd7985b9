use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Camera, DepthMap, PointCloud, RgbImage, Vec3};

/// Dense truncated signed distance volume. Samples sit on grid nodes
/// `origin + (i, j, k) * voxel`; the distance is positive in observed free space.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    pub origin: Vec3,
    pub voxel: f64,
    pub truncation: f64,
    pub dims: [usize; 3],
    pub sdf: Vec<f64>,
    pub weight: Vec<f64>,
    pub color: Vec<[f64; 3]>,
}

/// Loose cap on the node count so a bad voxel size fails instead of exhausting memory.
const MAX_NODES: usize = 1 << 28;

impl TsdfVolume {
    pub fn new(bounds: Aabb, voxel: f64, truncation: f64) -> Result<TsdfVolume> {
        if !(voxel > 0.0 && voxel.is_finite()) || !(truncation > 0.0 && truncation.is_finite()) {
            return Err(Error::invalid(format!(
                "voxel ({voxel}) and truncation ({truncation}) must be positive"
            )));
        }
        let ext = bounds.extent();
        if ext.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::invalid("volume bounds must be finite and ordered"));
        }
        let dims = [0, 1, 2].map(|k| (ext[k] / voxel).ceil() as usize + 1);
        let n = dims
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(*d))
            .unwrap_or(usize::MAX);
        if n > MAX_NODES {
            return Err(Error::invalid(format!(
                "volume of {dims:?} nodes exceeds the size limit"
            )));
        }
        Ok(TsdfVolume {
            origin: bounds.min,
            voxel,
            truncation,
            dims,
            sdf: vec![truncation; n],
            weight: vec![0.0; n],
            color: vec![[0.0; 3]; n],
        })
    }

    /// Volume over the cloud's bounds inflated by 5% with truncation `4 * voxel`.
    pub fn from_pointcloud(pc: &PointCloud, voxel: f64) -> Result<TsdfVolume> {
        let b = pc
            .bounds()
            .ok_or_else(|| Error::invalid("cannot size a volume from an empty point cloud"))?;
        TsdfVolume::new(b.inflated(0.05), voxel, 4.0 * voxel)
    }

    /// Samples a signed distance function at every node with unit weight.
    pub fn from_sdf_fn(
        bounds: Aabb,
        voxel: f64,
        truncation: f64,
        f: impl Fn(&Vec3) -> f64 + Sync,
    ) -> Result<TsdfVolume> {
        let mut vol = TsdfVolume::new(bounds, voxel, truncation)?;
        let [nx, ny, _] = vol.dims;
        let (origin, t) = (vol.origin, truncation);
        vol.sdf.par_iter_mut().enumerate().for_each(|(i, s)| {
            let p = origin + Vec3::new((i % nx) as f64, ((i / nx) % ny) as f64, (i / (nx * ny)) as f64) * voxel;
            *s = f(&p).clamp(-t, t);
        });
        vol.weight.iter_mut().for_each(|w| *w = 1.0);
        Ok(vol)
    }

    pub fn len(&self) -> usize {
        self.sdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sdf.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.voxel
    }

    pub fn observed_count(&self) -> usize {
        self.weight.iter().filter(|w| **w > 0.0).count()
    }

    pub fn check_invariants(&self) -> Result<()> {
        for i in 0..self.len() {
            if self.weight[i] < 0.0 || (self.weight[i] > 0.0 && self.sdf[i].abs() > self.truncation * (1.0 + 1e-12)) {
                return Err(Error::Invariant(format!("voxel {i} violates the TSDF bounds")));
            }
        }
        Ok(())
    }

    /// Projective update: every node in front of or within one truncation behind the observed
    /// surface averages in `clamp(d_pixel - z_node, -trunc, trunc)` with unit weight.
    pub fn integrate(&mut self, depth: &DepthMap, color: Option<&RgbImage>, cam: &Camera) -> Result<()> {
        depth.same_size(cam.width, cam.height)?;
        if let Some(c) = color {
            if c.width != depth.width || c.height != depth.height {
                return Err(Error::dims(depth.len(), c.len()));
            }
        }
        let [nx, ny, _] = self.dims;
        let (origin, voxel, trunc) = (self.origin, self.voxel, self.truncation);
        let slab = nx * ny;
        self.sdf
            .par_chunks_mut(slab)
            .zip(self.weight.par_chunks_mut(slab))
            .zip(self.color.par_chunks_mut(slab))
            .enumerate()
            .for_each(|(k, ((sdf, weight), col))| {
                for j in 0..ny {
                    for i in 0..nx {
                        let p = origin + Vec3::new(i as f64, j as f64, k as f64) * voxel;
                        let Some((u, v, z)) = cam.project(&p) else { continue };
                        if u < 0.0 || v < 0.0 || u >= cam.width as f64 || v >= cam.height as f64 {
                            continue;
                        }
                        let (pu, pv) = (u as u32, v as u32);
                        let Some(d) = depth.get(pu, pv) else { continue };
                        let diff = d - z;
                        if diff < -trunc {
                            continue;
                        }
                        let obs = diff.clamp(-trunc, trunc);
                        let idx = j * nx + i;
                        let w = weight[idx];
                        sdf[idx] = (sdf[idx] * w + obs) / (w + 1.0);
                        if let Some(c) = color {
                            let c = c.get(pu, pv);
                            for ch in 0..3 {
                                col[idx][ch] = (col[idx][ch] * w + c[ch]) / (w + 1.0);
                            }
                        }
                        weight[idx] = w + 1.0;
                    }
                }
            });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mat3;

    fn plane_setup() -> (TsdfVolume, DepthMap, Camera) {
        let cam = Camera::new(60.0, 60.0, 32.0, 24.0, 64, 48, Mat3::identity(), Vec3::zeros()).unwrap();
        let depth = DepthMap::from_fn(64, 48, |_, _| Some(2.0));
        let bounds = Aabb {
            min: Vec3::new(-0.5, -0.4, 1.5),
            max: Vec3::new(0.5, 0.4, 2.5),
        };
        (TsdfVolume::new(bounds, 0.05, 0.2).unwrap(), depth, cam)
    }

    #[test]
    fn plane_zero_crossing_and_repeat() {
        let (mut vol, depth, cam) = plane_setup();
        vol.integrate(&depth, None, &cam).unwrap();
        vol.check_invariants().unwrap();
        let [nx, ny, nz] = vol.dims;
        let mut crossings = 0;
        for k in 0..nz - 1 {
            for j in 0..ny {
                for i in 0..nx {
                    let (a, b) = (vol.index(i, j, k), vol.index(i, j, k + 1));
                    if vol.weight[a] > 0.0 && vol.weight[b] > 0.0 && vol.sdf[a] > 0.0 && vol.sdf[b] <= 0.0 {
                        crossings += 1;
                        assert!((vol.position(i, j, k).z - 2.0).abs() <= vol.voxel + 1e-9);
                    }
                }
            }
        }
        assert!(crossings > 0);
        let once = vol.clone();
        vol.integrate(&depth, None, &cam).unwrap();
        assert_eq!(vol.sdf, once.sdf);
        assert!(vol.weight.iter().zip(&once.weight).all(|(a, b)| *a == 2.0 * b));
    }

    #[test]
    fn empty_depth_leaves_volume_unchanged() {
        let (mut vol, _, cam) = plane_setup();
        let before = vol.clone();
        vol.integrate(&DepthMap::empty(64, 48), None, &cam).unwrap();
        assert_eq!(vol, before);
    }

    #[test]
    fn rejects_bad_parameters() {
        let b = Aabb {
            min: Vec3::zeros(),
            max: Vec3::new(1.0, 1.0, 1.0),
        };
        assert!(TsdfVolume::new(b, 0.0, 0.1).is_err());
        assert!(TsdfVolume::new(b, 1e-5, 0.1).is_err());
        assert!(TsdfVolume::from_pointcloud(&PointCloud::default(), 0.1).is_err());
    }
}
