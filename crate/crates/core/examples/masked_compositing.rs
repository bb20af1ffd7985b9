//! Renders a handful of Gaussians with and without validity masks and shows that masking a
//! Gaussian out matches deleting it.
//!
//! Usage: cargo run --release --example masked_compositing

use worldkit::compose::{render_gaussians, sample_gumbel_mask, threshold_masks, Gaussian};
use worldkit::geometry::{Camera, Mat3, Vec3};

fn main() -> worldkit::Result<()> {
    let cam = Camera::with_fov(1.0, 96, 72, Mat3::identity(), Vec3::zeros())?;
    let gaussians: Vec<Gaussian> = (0..5)
        .map(|k| Gaussian {
            mean: Vec3::new(-0.6 + 0.3 * k as f64, 0.0, 2.0 + 0.2 * k as f64),
            scale: Vec3::new(0.2, 0.1, 0.05),
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity: 0.8,
            color: [0.2 * k as f64, 0.5, 1.0 - 0.2 * k as f64],
        })
        .collect();

    let logits: Vec<[f64; 2]> = (0..5).map(|k| [2.0 - k as f64, 0.0]).collect();
    let sample = sample_gumbel_mask(&logits, 0.5, 7)?;
    println!(
        "relaxed keep probabilities {:?}",
        sample.soft.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>()
    );
    let masks = threshold_masks(&sample.soft);
    println!("hard masks {masks:?}");

    let (masked, t_masked) = render_gaussians(&gaussians, &masks, &cam)?;
    let kept: Vec<Gaussian> = gaussians
        .iter()
        .zip(&masks)
        .filter(|(_, m)| **m == 1.0)
        .map(|(g, _)| g.clone())
        .collect();
    let (deleted, t_deleted) = render_gaussians(&kept, &vec![1.0; kept.len()], &cam)?;
    let same = masked.pixels == deleted.pixels && t_masked == t_deleted;
    println!("masked render equals render with masked Gaussians deleted: {same}");
    let covered = t_masked.iter().filter(|t| **t < 0.99).count();
    println!("{covered} of {} pixels covered", t_masked.len());
    Ok(())
}
