//! Fits disparity scale and shift for synthetic frames against panorama guidance, then
//! flags and revises an inconsistent sequence.
//!
//! Usage: cargo run --release --example align_depth

use worldkit::align::{
    apply_alignment, build_reliability_mask, detect_and_revise_outliers, fit_scale_shift, MaskConfig, RansacConfig,
    RevisionConfig,
};
use worldkit::geometry::{depth_to_normal, render_depth, Camera, DepthMap, Vec3};
use worldkit::pipeline::scene::{parse_scene, SceneConfig};
use worldkit::pipeline::synth::{render_view, SceneKind, SynthScene};

/// Frame depth whose disparity relates to the truth by `1/d_true = gamma/d + beta`.
fn distort(d: &DepthMap, gamma: f64, beta: f64) -> DepthMap {
    let mut out = d.clone();
    for i in 0..out.len() {
        if out.valid[i] {
            out.values[i] = gamma / (1.0 / d.values[i] - beta);
        }
    }
    out
}

fn main() -> worldkit::Result<()> {
    let synth = SynthScene::render(SceneKind::StepDepth, 512, 0)?;
    let parsed = parse_scene(&synth.panorama, &synth.depth, Some(&synth.sky), &SceneConfig::default())?;
    let (gamma, beta) = (1.25, 0.03);
    let mut coeffs = Vec::new();
    let mut sequences = Vec::new();
    for frame in 0..12usize {
        let sequence = frame / 4;
        let yaw = 0.5 * frame as f64;
        let center = Vec3::new(0.3 * (frame % 4) as f64, 0.0, 0.0);
        let cam = Camera::with_fov(1.4, 160, 120, worldkit::geometry::yaw_pitch_rotation(yaw, -0.2), center)?;
        let view = render_view(&synth.truth, &cam, 0);
        // the last sequence is mis-scaled
        let g = if sequence == 2 { 2.0 * gamma } else { gamma };
        let d_m = distort(&view.depth, g, beta);
        let d_g = render_depth(&parsed.points, &cam, 2);
        let mask = build_reliability_mask(
            &d_m,
            &d_g,
            &view.normals,
            &depth_to_normal(&d_g, &cam)?,
            &vec![1.0; d_m.len()],
            &view.sky,
            &MaskConfig::default(),
        )?;
        let mut c = fit_scale_shift(&d_m, &d_g, &mask, &RansacConfig::default(), frame as u64)?;
        c.frame = frame;
        c.sequence = sequence;
        let err = apply_alignment(&d_m, &c)
            .values
            .iter()
            .zip(&view.depth.values)
            .zip(&mask.combined)
            .filter(|(_, m)| **m)
            .map(|((a, t), _)| (a - t).abs() / t)
            .fold(0.0, f64::max);
        println!(
            "frame {frame:>2} seq {sequence}: gamma {:.4} beta {:.4} inliers {:.2} max rel error {err:.4}",
            c.gamma, c.beta, c.inlier_ratio
        );
        coeffs.push(c);
        sequences.push(sequence);
    }
    let (revised, stats) = detect_and_revise_outliers(
        &coeffs,
        (0.5, 8.0),
        &sequences,
        &RevisionConfig {
            percentile: 50.0,
            ..RevisionConfig::default()
        },
    )?;
    println!(
        "anchor medians {:?}",
        stats.medians.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>()
    );
    for c in revised.iter().filter(|c| c.flagged) {
        println!(
            "frame {:>2} flagged: revised from {:?}, sequence discarded {}",
            c.frame, c.revised_from, c.discarded_sequence
        );
    }
    Ok(())
}
