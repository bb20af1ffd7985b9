use std::f64::consts::{PI, TAU};

use crate::geometry::erp::{erp_depth_view, perspective_camera};
use crate::geometry::{DepthMap, Vec3};
use crate::planner::{arc_steps, densify, orbit_point, Mode, PlanContext, Trajectory};

/// Median radial depth seen by a horizontal perspective view at `yaw`.
pub fn view_median_depth(depth: &DepthMap, center: Vec3, yaw: f64, fov_x: f64, size: u32) -> Option<f64> {
    let cam = perspective_camera(yaw, 0.0, fov_x, (size, size), center).ok()?;
    let view = erp_depth_view(depth, &cam);
    let mut vals: Vec<f64> = view.valid_values().collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    Some(if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    })
}

/// Orbits around the median-depth point of three horizontal views spaced 120 degrees apart.
///
/// Per view: a pitch-up orbit (optionally continued in azimuth at the raised elevation),
/// then azimuth orbits to either side. Every frame looks at the orbit center.
pub fn plan_regular(ctx: &PlanContext) -> Vec<Trajectory> {
    let cfg = ctx.config;
    let o = ctx.origin();
    let step = cfg.orbit_step_deg.to_radians();
    let mut out = Vec::new();
    for k in 0..3 {
        let yaw = k as f64 * TAU / 3.0;
        let Some(rho) = view_median_depth(
            &ctx.scene.pano_depth,
            o,
            yaw,
            cfg.regular_view_fov_deg.to_radians(),
            cfg.regular_view_size,
        ) else {
            continue;
        };
        let target = o + Vec3::new(yaw.sin(), 0.0, yaw.cos()) * rho;
        let a0 = yaw + PI;
        let pitch = cfg.regular_pitch_deg.to_radians();
        let azimuth = cfg.regular_azimuth_deg.to_radians();

        let arc = |from: (f64, f64), to: (f64, f64), pts: &mut Vec<Vec3>| {
            let span = (to.0 - from.0).abs().max((to.1 - from.1).abs());
            let n = arc_steps(span, rho, step, cfg.max_step);
            for s in 1..=n {
                let f = s as f64 / n as f64;
                pts.push(orbit_point(
                    &target,
                    rho,
                    from.0 + (to.0 - from.0) * f,
                    from.1 + (to.1 - from.1) * f,
                ));
            }
        };

        let mut pitched = vec![o];
        arc((a0, 0.0), (a0, pitch), &mut pitched);
        if cfg.regular_extra_azimuth {
            let extra = cfg.regular_extra_azimuth_deg.to_radians();
            arc((a0, pitch), (a0 + extra, pitch), &mut pitched);
        }
        let mut left = vec![o];
        arc((a0, 0.0), (a0 - azimuth, 0.0), &mut left);
        let mut right = vec![o];
        arc((a0, 0.0), (a0 + azimuth, 0.0), &mut right);

        for pts in [pitched, left, right] {
            let centers = densify(&pts, cfg.max_step);
            let lookats = vec![target; centers.len()];
            let t = Trajectory {
                mode: Mode::Regular,
                frames: ctx.frames(&centers, &lookats),
                landmark_id: None,
                iterative: false,
            };
            if let Some(t) = ctx.finish(t) {
                out.push(t);
            }
        }
    }
    out
}
