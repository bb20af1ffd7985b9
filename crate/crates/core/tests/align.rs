use proptest::prelude::*;

use worldkit::align::{
    apply_alignment, detect_and_revise_outliers, expand_pointcloud, fit_scale_shift, AlignCoeff, AlignedFrame,
    PercentileScope, RansacConfig, ReliabilityMask, RevisionConfig,
};
use worldkit::geometry::{backproject_depth, Camera, DepthMap, Mat3, Vec3};
use worldkit::Error;

fn pair(g: f64, b: f64) -> (DepthMap, DepthMap) {
    let dm = DepthMap::from_fn(32, 24, |u, v| Some(0.9 + 0.15 * u as f64 + 0.05 * v as f64));
    let dg = DepthMap::from_fn(32, 24, |u, v| Some(1.0 / (g / dm.get(u, v).unwrap() + b)));
    (dm, dg)
}

fn coeff(frame: usize, sequence: usize, gamma: f64) -> AlignCoeff {
    AlignCoeff {
        gamma,
        beta: 0.02,
        ..AlignCoeff::identity(frame, sequence)
    }
}

proptest! {
    #[test]
    fn noiseless_fit_is_exact_and_seed_free(g in 0.3f64..4.0, b in 0.0f64..0.4, seed in any::<u64>()) {
        let (dm, dg) = pair(g, b);
        let mask = ReliabilityMask::all_valid(&dm, &dg);
        let c = fit_scale_shift(&dm, &dg, &mask, &RansacConfig::default(), seed).unwrap();
        prop_assert!((c.gamma - g).abs() < 1e-6 && (c.beta - b).abs() < 1e-6);
        let aligned = apply_alignment(&dm, &c);
        for i in 0..aligned.len() {
            prop_assert!((aligned.values[i] - dg.values[i]).abs() < 1e-6 * dg.values[i]);
        }
    }

    #[test]
    fn revision_only_copies_unflagged_frames(gammas in prop::collection::vec(0.5f64..3.0, 3..30), seqlen in 1usize..6) {
        let coeffs: Vec<AlignCoeff> = gammas.iter().enumerate().map(|(i, g)| coeff(i, i / seqlen, *g)).collect();
        let seqs: Vec<usize> = coeffs.iter().map(|c| c.sequence).collect();
        for scope in [PercentileScope::Global, PercentileScope::PerSequence] {
            let cfg = RevisionConfig { scope, ..RevisionConfig::default() };
            let (out, _) = detect_and_revise_outliers(&coeffs, (0.5, 8.0), &seqs, &cfg).unwrap();
            prop_assert_eq!(out.len(), coeffs.len());
            for (o, c) in out.iter().zip(&coeffs) {
                prop_assert_eq!(o.frame, c.frame);
                match o.revised_from {
                    Some(src) => {
                        prop_assert!(o.flagged);
                        prop_assert!(!out[src].flagged && out[src].sequence == o.sequence);
                        prop_assert_eq!((o.gamma, o.beta), (coeffs[src].gamma, coeffs[src].beta));
                    }
                    None if o.flagged => prop_assert!(o.discarded_sequence),
                    None => prop_assert_eq!((o.gamma, o.beta), (c.gamma, c.beta)),
                }
            }
            // a sequence is discarded exactly when all its frames are flagged
            for s in seqs.iter().copied() {
                let members: Vec<&AlignCoeff> = out.iter().filter(|o| o.sequence == s).collect();
                let all = members.iter().all(|o| o.flagged);
                prop_assert!(members.iter().all(|o| o.discarded_sequence == all));
            }
        }
    }
}

#[test]
fn degenerate_inputs_are_rejected() {
    // constant disparity cannot separate scale from shift
    let flat = DepthMap::from_fn(32, 24, |_, _| Some(2.0));
    let mask = ReliabilityMask::all_valid(&flat, &flat);
    let err = fit_scale_shift(&flat, &flat, &mask, &RansacConfig::default(), 0).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)), "{err}");
    let (dm, _) = pair(1.0, 0.0);
    let empty = DepthMap::empty(32, 24);
    let err = fit_scale_shift(
        &dm,
        &empty,
        &ReliabilityMask::all_valid(&dm, &empty),
        &RansacConfig::default(),
        0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::SparseGuidance { .. }), "{err}");
    assert!(detect_and_revise_outliers(&[coeff(0, 0, 1.0)], (0.5, 8.0), &[0], &RevisionConfig::default()).is_err());
}

#[test]
fn expansion_respects_masks_and_voxels() {
    let cam = Camera::with_fov(1.0, 16, 12, Mat3::identity(), Vec3::zeros()).unwrap();
    let depth = DepthMap::from_fn(16, 12, |_, _| Some(3.0));
    let pano = backproject_depth(&depth, &cam).unwrap();
    let mut mask = vec![false; 16 * 12];
    mask[0] = true;
    let moved = Camera {
        translation: Vec3::new(0.0, 0.0, 10.0),
        ..cam.clone()
    };
    let frame = AlignedFrame {
        depth: depth.clone(),
        camera: moved,
        mask,
        color: None,
    };
    let out = expand_pointcloud(&pano, &[frame], 1e-3).unwrap();
    assert_eq!(out.len(), pano.len() + 1);
    let coarse = expand_pointcloud(&pano, &[], 100.0).unwrap();
    // voxel keys floor at zero, so the frustum splits by the signs of x and y
    assert_eq!(coarse.len(), 4);
}
