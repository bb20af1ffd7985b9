use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{remove_edge_floaters, DepthMap, NormalMap};
use crate::stats::percentile_sorted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    /// Minimum normalized confidence.
    pub conf_threshold: f64,
    /// Relative depth jump marking edge floaters in the frame depth.
    pub floater_jump: f64,
    /// Largest allowed angle between frame and guidance normals, degrees.
    pub max_normal_angle_deg: f64,
    /// Depth ratios outside `[lo, hi]` percentiles are dropped.
    pub percentile_band: [f64; 2],
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            conf_threshold: 0.1,
            floater_jump: 0.1,
            max_normal_angle_deg: 90.0,
            percentile_band: [5.0, 95.0],
        }
    }
}

/// Per-pixel reliability with each contributing sub-mask kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMask {
    pub width: u32,
    pub height: u32,
    pub combined: Vec<bool>,
    pub confidence: Vec<bool>,
    pub guidance: Vec<bool>,
    pub normal_consistent: Vec<bool>,
    pub percentile_pass: Vec<bool>,
    pub non_sky: Vec<bool>,
}

impl ReliabilityMask {
    pub fn count(&self) -> usize {
        self.combined.iter().filter(|m| **m).count()
    }

    /// Mask with every pixel where both depths are valid.
    pub fn all_valid(d_m: &DepthMap, d_g: &DepthMap) -> ReliabilityMask {
        let n = d_m.len();
        let both: Vec<bool> = (0..n).map(|i| d_m.valid[i] && d_g.valid[i]).collect();
        ReliabilityMask {
            width: d_m.width,
            height: d_m.height,
            combined: both.clone(),
            confidence: d_m.valid.clone(),
            guidance: d_g.valid.clone(),
            normal_consistent: vec![true; n],
            percentile_pass: vec![true; n],
            non_sky: vec![true; n],
        }
    }
}

/// Intersects confidence, guidance validity, normal agreement, a depth-ratio percentile
/// band and the sky complement.
///
/// Pixels lacking a normal in either map pass the normal test. The percentile band is taken
/// over the ratio `d_m / d_g` on pixels that pass the confidence and guidance tests.
pub fn build_reliability_mask(
    d_m: &DepthMap,
    d_g: &DepthMap,
    n_m: &NormalMap,
    n_g: &NormalMap,
    conf: &[f64],
    sky: &[bool],
    cfg: &MaskConfig,
) -> Result<ReliabilityMask> {
    let (w, h) = (d_m.width, d_m.height);
    d_g.same_size(w, h)?;
    let n = d_m.len();
    for (what, len) in [
        ("frame normals", n_m.len()),
        ("guidance normals", n_g.len()),
        ("confidence", conf.len()),
        ("sky mask", sky.len()),
    ] {
        if len != n {
            return Err(Error::dims(format!("{n} pixels"), format!("{len} {what} entries")));
        }
    }
    let clean = remove_edge_floaters(d_m, cfg.floater_jump, false);
    let confidence: Vec<bool> = (0..n)
        .map(|i| clean.valid[i] && conf[i] >= cfg.conf_threshold)
        .collect();
    let guidance = d_g.valid.clone();
    let cos_max = cfg.max_normal_angle_deg.to_radians().cos();
    let normal_consistent: Vec<bool> = (0..n)
        .map(|i| match (n_m.valid[i], n_g.valid[i]) {
            (true, true) => n_m.vectors[i].dot(&n_g.vectors[i]) >= cos_max - 1e-12,
            _ => true,
        })
        .collect();
    let mut ratios: Vec<f64> = (0..n)
        .filter(|&i| confidence[i] && guidance[i])
        .map(|i| d_m.values[i] / d_g.values[i])
        .collect();
    ratios.sort_by(f64::total_cmp);
    let percentile_pass: Vec<bool> = if ratios.is_empty() {
        vec![true; n]
    } else {
        let lo = percentile_sorted(&ratios, cfg.percentile_band[0]);
        let hi = percentile_sorted(&ratios, cfg.percentile_band[1]);
        (0..n)
            .map(|i| {
                if !(d_m.valid[i] && d_g.valid[i]) {
                    return true;
                }
                let r = d_m.values[i] / d_g.values[i];
                r >= lo && r <= hi
            })
            .collect()
    };
    let non_sky: Vec<bool> = sky.iter().map(|s| !s).collect();
    let combined = (0..n)
        .map(|i| confidence[i] && guidance[i] && normal_consistent[i] && percentile_pass[i] && non_sky[i])
        .collect();
    Ok(ReliabilityMask {
        width: w,
        height: h,
        combined,
        confidence,
        guidance,
        normal_consistent,
        percentile_pass,
        non_sky,
    })
}
