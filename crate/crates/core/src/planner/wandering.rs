use std::f64::consts::{PI, TAU};

use crate::geometry::Vec3;
use crate::navmesh::shortest_path_cells;
use crate::planner::{densify, Mode, PlanContext, Trajectory};

/// Farthest reachable cell per horizontal sector around the start cell, by geodesic distance.
pub(crate) fn sector_targets(ctx: &PlanContext) -> Vec<(f64, usize)> {
    let Some(field) = ctx.field.as_ref() else {
        return Vec::new();
    };
    let nav = ctx.nav();
    let sectors = ctx.config.wander_sectors.max(1);
    let s = nav.position(field.source);
    let mut best: Vec<Option<(f64, usize)>> = vec![None; sectors];
    for c in 0..nav.len() {
        let d = field.distance[c];
        if !d.is_finite() || c == field.source {
            continue;
        }
        let p = nav.position(c);
        let a = (p.z - s.z).atan2(p.x - s.x) + PI;
        let k = ((a / (TAU / sectors as f64)).floor() as usize) % sectors;
        if best[k].is_none_or(|(bd, _)| d > bd) {
            best[k] = Some((d, c));
        }
    }
    let mut list: Vec<(f64, usize)> = best.into_iter().flatten().collect();
    list.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    list
}

/// Shortest navigation paths to the farthest cells of the most distant sectors.
///
/// The gaze runs a fixed number of frames ahead along the path; the last frames extrapolate
/// along the final heading.
pub fn plan_wandering(ctx: &PlanContext) -> Vec<Trajectory> {
    let Some(field) = ctx.field.as_ref() else {
        return Vec::new();
    };
    let cfg = ctx.config;
    let mut out = Vec::new();
    for (_, target) in sector_targets(ctx) {
        if out.len() >= cfg.caps.wandering {
            break;
        }
        let path = shortest_path_cells(field, target);
        let mut pts = vec![ctx.origin()];
        pts.extend(path.iter().map(|&c| ctx.lifted(c)));
        let centers = densify(&pts, cfg.max_step);
        let lookats = lookahead(&centers, cfg.wander_lookahead.max(1));
        let t = Trajectory {
            mode: Mode::Wandering,
            frames: ctx.frames(&centers, &lookats),
            landmark_id: None,
            iterative: false,
        };
        if let Some(t) = ctx.finish(t) {
            out.push(t);
        }
    }
    out
}

/// Gaze targets `ahead` frames forward, extended past the end along the final heading.
pub(crate) fn lookahead(centers: &[Vec3], ahead: usize) -> Vec<Vec3> {
    let n = centers.len();
    let heading = if n >= 2 {
        let d = centers[n - 1] - centers[n - 2];
        let h = Vec3::new(d.x, 0.0, d.z);
        if h.norm() > 1e-9 {
            h.normalize()
        } else {
            Vec3::z()
        }
    } else {
        Vec3::z()
    };
    (0..n)
        .map(|k| {
            let j = k + ahead;
            if j < n {
                let t = centers[j];
                if (t - centers[k]).norm() > 1e-6 {
                    return t;
                }
            }
            let extra = (j.saturating_sub(n - 1)).max(1) as f64;
            let base = centers[n - 1];
            let t = base + heading * extra;
            if (t - centers[k]).norm() > 1e-6 {
                t
            } else {
                centers[k] + heading
            }
        })
        .collect()
}
