use crate::error::{Error, Result};
use crate::geometry::{depth_to_normal, Camera, DepthMap, NormalMap, RgbImage};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable zero-padded Gaussian filter.
fn blur(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let xx = x as i64 + t as i64 - r;
                if xx >= 0 && xx < w as i64 {
                    s += kv * src[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let yy = y as i64 + t as i64 - r;
                if yy >= 0 && yy < h as i64 {
                    s += kv * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = s;
        }
    }
    out
}

fn same_dims(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::dims(
            format!("{}x{}", a.width, a.height),
            format!("{}x{}", b.width, b.height),
        ));
    }
    Ok(())
}

/// Mean SSIM over pixels and channels with an 11x11 Gaussian window (sigma 1.5).
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    same_dims(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w == 0 || h == 0 {
        return Err(Error::UndefinedLoss("SSIM of an empty image".into()));
    }
    let k = gaussian_kernel();
    let mut total = 0.0;
    for c in 0..3 {
        let x: Vec<f64> = a.pixels.iter().map(|p| p[c]).collect();
        let y: Vec<f64> = b.pixels.iter().map(|p| p[c]).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let (mx, my) = (blur(&x, w, h, &k), blur(&y, w, h, &k));
        let (sxx, syy, sxy) = (blur(&xx, w, h, &k), blur(&yy, w, h, &k), blur(&xy, w, h, &k));
        for i in 0..w * h {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            total += ((2.0 * ux * uy + C1) * (2.0 * cxy + C2)) / ((ux * ux + uy * uy + C1) * (vx + vy + C2));
        }
    }
    Ok(total / (3 * w * h) as f64)
}

/// `(1 - lambda_c1) * L1 + lambda_c1 * (1 - SSIM)`.
pub fn photometric_loss(rendered: &RgbImage, target: &RgbImage, lambda_c1: f64) -> Result<f64> {
    same_dims(rendered, target)?;
    if rendered.pixels.is_empty() {
        return Err(Error::UndefinedLoss("photometric loss of an empty image".into()));
    }
    let l1 = rendered
        .pixels
        .iter()
        .zip(&target.pixels)
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]).abs()).sum::<f64>())
        .sum::<f64>()
        / (3 * rendered.pixels.len()) as f64;
    let dssim = if lambda_c1 > 0.0 {
        1.0 - ssim(rendered, target)?
    } else {
        0.0
    };
    Ok((1.0 - lambda_c1) * l1 + lambda_c1 * dssim)
}

/// `lambda_d * mean|d_hat - d_a| + lambda_n * mean(1 - cos(n_hat, n))` over pixels where
/// all four inputs are valid.
pub fn geometric_loss(
    d_hat: &DepthMap,
    d_a: &DepthMap,
    n_hat: &NormalMap,
    n: &NormalMap,
    lambda_d: f64,
    lambda_n: f64,
) -> Result<f64> {
    d_a.same_size(d_hat.width, d_hat.height)?;
    if n_hat.len() != d_hat.len() || n.len() != d_hat.len() {
        return Err(Error::dims(d_hat.len(), n_hat.len().max(n.len())));
    }
    let (mut count, mut depth, mut normal) = (0usize, 0.0, 0.0);
    for i in 0..d_hat.len() {
        if !(d_hat.valid[i] && d_a.valid[i] && n_hat.valid[i] && n.valid[i]) {
            continue;
        }
        count += 1;
        depth += (d_hat.values[i] - d_a.values[i]).abs();
        normal += 1.0 - n_hat.vectors[i].dot(&n.vectors[i]).clamp(-1.0, 1.0);
    }
    if count == 0 {
        return Err(Error::UndefinedLoss("geometric loss has no valid pixels".into()));
    }
    Ok(lambda_d * depth / count as f64 + lambda_n * normal / count as f64)
}

/// Mean angle between normals derived from `depth` and `target`, both in the camera frame.
pub fn depth_to_normal_loss(depth: &DepthMap, cam: &Camera, target: &NormalMap) -> Result<f64> {
    if target.width != depth.width || target.height != depth.height {
        return Err(Error::dims(
            format!("{}x{}", depth.width, depth.height),
            format!("{}x{}", target.width, target.height),
        ));
    }
    let derived = depth_to_normal(depth, cam)?;
    let (mut count, mut sum) = (0usize, 0.0);
    for i in 0..derived.len() {
        if derived.valid[i] && target.valid[i] {
            count += 1;
            sum += derived.vectors[i].dot(&target.vectors[i]).clamp(-1.0, 1.0).acos();
        }
    }
    if count == 0 {
        return Err(Error::UndefinedLoss("depth-to-normal loss has no valid pixels".into()));
    }
    Ok(sum / count as f64)
}

/// Mean sigmoid cross-entropy over masked pixels, `max(x, 0) - x y + ln(1 + e^-|x|)`.
pub fn validity_bce_loss(logits: &[f64], labels: &[bool], mask: &[bool]) -> Result<f64> {
    if logits.len() != labels.len() || logits.len() != mask.len() {
        return Err(Error::dims(logits.len(), labels.len().max(mask.len())));
    }
    let (mut count, mut sum) = (0usize, 0.0);
    for i in 0..logits.len() {
        if !mask[i] {
            continue;
        }
        let x = logits[i];
        let y = if labels[i] { 1.0 } else { 0.0 };
        sum += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
        count += 1;
    }
    if count == 0 {
        return Err(Error::UndefinedLoss("validity loss over an empty mask".into()));
    }
    Ok(sum / count as f64)
}
