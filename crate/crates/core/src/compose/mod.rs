//! Forward kernels of Gaussian scene composition: masked compositing, mask sampling, losses,
//! TSDF fusion and iso-surface extraction.

mod gaussian;
mod losses;
mod marching;
mod tsdf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gaussian::{project_gaussian, render_gaussians, scale_regularization, Gaussian, Splat};
pub use losses::{
    depth_to_normal_loss, geometric_loss, photometric_loss, ssim, validity_bce_loss, SSIM_SIGMA, SSIM_WINDOW,
};
pub use marching::{extract_mesh, marching_cubes, remove_small_components, simplify_mesh, MeshExtraction};
pub use tsdf::TsdfVolume;

/// One Gaussian's contribution at a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelEntry {
    pub depth: f64,
    /// Opacity after the 2D falloff, in `[0, 1]`.
    pub opacity: f64,
    pub color: [f64; 3],
    /// Binary mask or keep probability.
    pub mask: f64,
}

/// Entries at one pixel ordered front to back.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PixelGaussianList {
    pub entries: Vec<PixelEntry>,
}

impl PixelGaussianList {
    pub fn new(mut entries: Vec<PixelEntry>) -> PixelGaussianList {
        entries.sort_by(|a, b| a.depth.total_cmp(&b.depth));
        PixelGaussianList { entries }
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.entries.windows(2).any(|w| w[1].depth < w[0].depth) {
            return Err(Error::Invariant("pixel entries must be ordered by depth".into()));
        }
        if self
            .entries
            .iter()
            .any(|e| !(0.0..=1.0).contains(&e.opacity) || !(0.0..=1.0).contains(&e.mask))
        {
            return Err(Error::Invariant("opacity and mask must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Front-to-back compositing where masked-out entries add no color and absorb no light:
/// `c = sum M_k c_k s_k T_k`, `T_{k+1} = T_k (1 - M_k s_k)`. Returns the color and `T_{N+1}`.
pub fn composite_masked(list: &PixelGaussianList) -> ([f64; 3], f64) {
    let mut c = [0.0; 3];
    let mut t = 1.0;
    for e in &list.entries {
        if e.mask == 0.0 {
            continue;
        }
        let a = e.mask * e.opacity;
        for k in 0..3 {
            c[k] += e.color[k] * a * t;
        }
        t *= 1.0 - a;
    }
    (c, t)
}

/// A straight-through Gumbel-softmax draw over (keep, drop) logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSample {
    /// Hard masks: 1 where the keep class wins.
    pub hard: Vec<f64>,
    /// Relaxed keep probabilities.
    pub soft: Vec<f64>,
}

pub fn sample_gumbel_mask(logits: &[[f64; 2]], temperature: f64, seed: u64) -> Result<MaskSample> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gumbel = || {
        // U in (0, 1) so both logarithms stay finite
        let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        -(-u.ln()).ln()
    };
    let mut hard = Vec::with_capacity(logits.len());
    let mut soft = Vec::with_capacity(logits.len());
    for l in logits {
        let a = (l[0] + gumbel()) / temperature;
        let b = (l[1] + gumbel()) / temperature;
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        soft.push(ea / (ea + eb));
        hard.push(if a >= b { 1.0 } else { 0.0 });
    }
    Ok(MaskSample { hard, soft })
}

/// Deterministic evaluation-time mask from keep probabilities.
pub fn threshold_masks(probabilities: &[f64]) -> Vec<f64> {
    probabilities
        .iter()
        .map(|p| if *p >= 0.5 { 1.0 } else { 0.0 })
        .collect()
}

/// `lambda_m * mean(M)^2`.
pub fn mask_sparsity_loss(masks: &[f64], lambda_m: f64) -> Result<f64> {
    if masks.is_empty() {
        return Err(Error::UndefinedLoss("mask sparsity over an empty mask set".into()));
    }
    let mean = masks.iter().sum::<f64>() / masks.len() as f64;
    Ok(lambda_m * mean * mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_c1: f64,
    /// Weight of a perceptual term that is not computed here.
    pub lambda_c2: f64,
    pub lambda_d: f64,
    pub lambda_n: f64,
    pub lambda_m: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_c1: 0.2,
            lambda_c2: 0.0,
            lambda_d: 0.5,
            lambda_n: 0.1,
            lambda_m: 0.05,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda_c1,
            self.lambda_c2,
            self.lambda_d,
            self.lambda_n,
            self.lambda_m,
        ];
        if all.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || self.lambda_c1 > 1.0 {
            return Err(Error::invalid(
                "loss weights must be non-negative and lambda_c1 at most 1",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(opacity: f64, color: [f64; 3], mask: f64) -> PixelEntry {
        PixelEntry {
            depth: 0.0,
            opacity,
            color,
            mask,
        }
    }

    #[test]
    fn compositing_examples() {
        let none = PixelGaussianList::new(vec![e(0.7, [1.0; 3], 0.0); 3]);
        assert_eq!(composite_masked(&none), ([0.0; 3], 1.0));
        let one = PixelGaussianList::new(vec![e(1.0, [1.0, 0.0, 0.0], 1.0)]);
        assert_eq!(composite_masked(&one), ([1.0, 0.0, 0.0], 0.0));
        let two = PixelGaussianList::new(vec![e(0.5, [1.0, 0.0, 0.0], 1.0), e(0.5, [0.0, 1.0, 0.0], 1.0)]);
        assert_eq!(composite_masked(&two), ([0.5, 0.25, 0.0], 0.25));
    }

    #[test]
    fn gumbel_masks_follow_logits() {
        let strong = vec![[20.0, -20.0]; 10_000];
        let s = sample_gumbel_mask(&strong, 1.0, 1).unwrap();
        assert!(s.hard.iter().sum::<f64>() / 1e4 > 0.999);
        let even = vec![[0.3, 0.3]; 10_000];
        let s = sample_gumbel_mask(&even, 1.0, 2).unwrap();
        let mean = s.hard.iter().sum::<f64>() / 1e4;
        assert!((0.45..=0.55).contains(&mean), "{mean}");
        assert_eq!(sample_gumbel_mask(&even, 1.0, 2).unwrap(), s);
        assert!(sample_gumbel_mask(&even, 0.0, 2).is_err());
        assert_eq!(threshold_masks(&[0.2, 0.5, 0.9]), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn sparsity_values() {
        assert_eq!(mask_sparsity_loss(&[0.0; 4], 0.3).unwrap(), 0.0);
        assert_eq!(mask_sparsity_loss(&[1.0; 4], 0.3).unwrap(), 0.3);
        assert!((mask_sparsity_loss(&[1.0, 0.0, 1.0, 0.0], 0.3).unwrap() - 0.075).abs() < 1e-15);
        assert!(mask_sparsity_loss(&[], 0.3).is_err());
        assert!(LossWeights::default().validate().is_ok());
        assert!(LossWeights {
            lambda_c1: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
