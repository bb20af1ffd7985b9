//! Per-frame depth alignment to the panoramic guidance depth.
//!
//! Frame depth is mapped to guidance depth by an affine transform in disparity space,
//! `1/d_a = gamma * (1/d_m) + beta`, fitted with RANSAC on reliable pixels. Frames whose
//! transform disagrees with the rest of the scene are replaced by a neighbor's transform.

mod fit;
mod mask;
mod revise;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{
    backproject_depth_colored, merge_pointclouds, voxel_downsample, Camera, DepthMap, PointCloud, RgbImage,
};

pub use fit::{fit_scale_shift, RansacConfig};
pub use mask::{build_reliability_mask, MaskConfig, ReliabilityMask};
pub use revise::{anchor_stats, detect_and_revise_outliers, AnchorStats, PercentileScope, RevisionConfig};

/// Disparity-space transform of one frame and its revision state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignCoeff {
    pub frame: usize,
    #[serde(default)]
    pub sequence: usize,
    /// Disparity scale.
    pub gamma: f64,
    /// Disparity shift, in 1/m.
    pub beta: f64,
    pub inlier_ratio: f64,
    pub flagged: bool,
    /// Frame whose coefficients replaced this frame's own.
    pub revised_from: Option<usize>,
    pub discarded_sequence: bool,
    /// No usable fit for this frame; its coefficients must come from a neighbor.
    #[serde(default)]
    pub fit_failed: bool,
}

impl AlignCoeff {
    pub fn identity(frame: usize, sequence: usize) -> AlignCoeff {
        AlignCoeff {
            frame,
            sequence,
            gamma: 1.0,
            beta: 0.0,
            inlier_ratio: 1.0,
            flagged: false,
            revised_from: None,
            discarded_sequence: false,
            fit_failed: false,
        }
    }

    /// Placeholder for a frame whose fit failed.
    pub fn failed(frame: usize, sequence: usize) -> AlignCoeff {
        AlignCoeff {
            inlier_ratio: 0.0,
            fit_failed: true,
            ..AlignCoeff::identity(frame, sequence)
        }
    }

    /// Aligned disparity for a frame disparity.
    pub fn disparity(&self, x: f64) -> f64 {
        self.gamma * x + self.beta
    }
}

/// Disparity below which aligned pixels are invalidated.
pub const DISPARITY_EPS: f64 = 1e-6;

/// `d_a = 1 / (gamma / d_m + beta)`; pixels whose aligned disparity is at most
/// [`DISPARITY_EPS`] become invalid.
pub fn apply_alignment(d_m: &DepthMap, coeff: &AlignCoeff) -> DepthMap {
    let mut out = d_m.clone();
    for i in 0..out.len() {
        if !out.valid[i] {
            continue;
        }
        let disp = coeff.disparity(1.0 / d_m.values[i]);
        if disp <= DISPARITY_EPS || !disp.is_finite() {
            out.invalidate(i);
        } else {
            out.values[i] = 1.0 / disp;
        }
    }
    out
}

/// An aligned frame ready for back-projection.
#[derive(Debug, Clone)]
pub struct AlignedFrame {
    pub depth: DepthMap,
    pub camera: Camera,
    pub mask: Vec<bool>,
    pub color: Option<RgbImage>,
}

/// Union of the panoramic cloud and the masked back-projections of every frame,
/// voxel-downsampled.
pub fn expand_pointcloud(pano: &PointCloud, aligned: &[AlignedFrame], voxel: f64) -> Result<PointCloud> {
    let extras = aligned
        .iter()
        .map(|f| backproject_depth_colored(&f.depth, &f.camera, f.color.as_ref(), Some(&f.mask)))
        .collect::<Result<Vec<_>>>()?;
    voxel_downsample(&merge_pointclouds(pano, &extras), voxel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_arithmetic() {
        let d = DepthMap::from_values(2, 1, vec![2.0, 2.0]).unwrap();
        let same = apply_alignment(&d, &AlignCoeff::identity(0, 0));
        assert_eq!(same, d);
        let c = AlignCoeff {
            beta: 0.25,
            ..AlignCoeff::identity(0, 0)
        };
        let a = apply_alignment(&d, &c);
        assert!((a.values[0] - 4.0 / 3.0).abs() < 1e-12);
        let c = AlignCoeff {
            beta: -0.5,
            ..AlignCoeff::identity(0, 0)
        };
        assert_eq!(apply_alignment(&d, &c).valid_count(), 0);
    }

    #[test]
    fn expansion_without_frames_is_downsampled_panorama() {
        use crate::geometry::Vec3;
        let pano = PointCloud::from_positions(vec![
            Vec3::new(0.01, 0.0, 0.0),
            Vec3::new(0.02, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ]);
        let out = expand_pointcloud(&pano, &[], 0.1).unwrap();
        assert_eq!(out, voxel_downsample(&pano, 0.1).unwrap());
        assert_eq!(out.len(), 2);
    }
}
