use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{AlignCoeff, ReliabilityMask};
use crate::error::{Error, Result};
use crate::geometry::DepthMap;
use crate::stats::percentile_sorted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Inlier threshold as a fraction of the median guidance disparity.
    pub threshold_rel: f64,
    pub min_support: usize,
    /// Least-squares refits on the inlier set after the RANSAC stage.
    pub refits: usize,
    /// Smallest accepted `(P95 - P5) / P50` of the frame disparities; narrower spreads leave
    /// scale and shift unidentifiable.
    pub min_spread: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            iterations: 512,
            threshold_rel: 0.02,
            min_support: 200,
            refits: 2,
            min_spread: 0.05,
        }
    }
}

fn least_squares(pairs: &[(f64, f64)], take: impl Fn(usize) -> bool) -> Option<(f64, f64)> {
    let (mut n, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (i, &(x, y)) in pairs.iter().enumerate() {
        if take(i) {
            n += 1.0;
            sx += x;
            sy += y;
        }
    }
    if n < 2.0 {
        return None;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (i, &(x, y)) in pairs.iter().enumerate() {
        if take(i) {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
        }
    }
    if !(sxx > 0.0) {
        return None;
    }
    let g = sxy / sxx;
    Some((g, my - g * mx))
}

fn inliers(pairs: &[(f64, f64)], g: f64, b: f64, thr: f64) -> Vec<bool> {
    pairs.iter().map(|&(x, y)| (g * x + b - y).abs() <= thr).collect()
}

/// Fits `1/d_g = gamma * (1/d_m) + beta` over masked pixels by two-point RANSAC followed by
/// least-squares refits on the inliers.
///
/// Pixel pairs are sorted before sampling, so the result does not depend on pixel order.
pub fn fit_scale_shift(
    d_m: &DepthMap,
    d_g: &DepthMap,
    mask: &ReliabilityMask,
    cfg: &RansacConfig,
    seed: u64,
) -> Result<AlignCoeff> {
    d_g.same_size(d_m.width, d_m.height)?;
    if mask.combined.len() != d_m.len() {
        return Err(Error::dims(d_m.len(), mask.combined.len()));
    }
    let mut pairs: Vec<(f64, f64)> = (0..d_m.len())
        .filter(|&i| mask.combined[i] && d_m.valid[i] && d_g.valid[i])
        .map(|i| (1.0 / d_m.values[i], 1.0 / d_g.values[i]))
        .collect();
    let support = pairs.len();
    if support < cfg.min_support.max(2) {
        return Err(Error::SparseGuidance {
            support,
            required: cfg.min_support.max(2),
        });
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let spread = (percentile_sorted(&xs, 95.0) - percentile_sorted(&xs, 5.0)) / percentile_sorted(&xs, 50.0);
    if !(spread >= cfg.min_spread) {
        return Err(Error::Degenerate(format!(
            "frame disparity spread {spread:.4} is below {}; scale and shift are not identifiable",
            cfg.min_spread
        )));
    }
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    let thr = cfg.threshold_rel * percentile_sorted(&ys, 50.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, f64, f64)> = None;
    for _ in 0..cfg.iterations {
        let i = rng.random_range(0..support);
        let j = rng.random_range(0..support);
        let ((x1, y1), (x2, y2)) = (pairs[i], pairs[j]);
        let dx = x2 - x1;
        if dx.abs() <= 1e-12 * x1.abs().max(x2.abs()).max(1e-12) {
            continue;
        }
        let g = (y2 - y1) / dx;
        let b = y1 - g * x1;
        let count = pairs.iter().filter(|&&(x, y)| (g * x + b - y).abs() <= thr).count();
        if best.is_none_or(|(c, _, _)| count > c) {
            best = Some((count, g, b));
        }
    }
    let (mut g, mut b) = match best {
        Some((_, g, b)) => (g, b),
        // every sample shares one disparity: fall back to a pure shift
        None => least_squares(&pairs, |_| true).unwrap_or((1.0, ys[support / 2] - pairs[0].0)),
    };
    let mut mask_in = inliers(&pairs, g, b, thr);
    for _ in 0..cfg.refits {
        match least_squares(&pairs, |i| mask_in[i]) {
            Some((ng, nb)) => {
                g = ng;
                b = nb;
            }
            None => break,
        }
        mask_in = inliers(&pairs, g, b, thr);
    }
    let count = mask_in.iter().filter(|m| **m).count();
    if !(g > 0.0 && g.is_finite() && b.is_finite()) {
        return Err(Error::Degenerate(format!(
            "disparity fit produced a non-positive scale {g}"
        )));
    }
    Ok(AlignCoeff {
        frame: 0,
        sequence: 0,
        gamma: g,
        beta: b,
        inlier_ratio: count as f64 / support as f64,
        flagged: false,
        revised_from: None,
        discarded_sequence: false,
        fit_failed: false,
    })
}
