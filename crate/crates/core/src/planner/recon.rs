use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::geometry::{voxel_key, yaw_pitch_rotation, TriangleMesh, Vec3};
use crate::navmesh::shortest_path_cells;
use crate::planner::{arc_steps, densify, pitch_of, Landmark, Mode, PlanContext, PlannerConfig, Trajectory};

/// Cluster of stretched panoramic-mesh faces marking geometry hidden from the panorama.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconNode {
    pub position: [f64; 3],
    /// Mean face normal of the cluster, unit length or zero.
    pub normal: [f64; 3],
    pub support: usize,
    pub landmark_id: Option<u32>,
}

impl ReconNode {
    pub fn point(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

/// Clusters faces whose stretch ratio exceeds the threshold, suppresses clusters closer than
/// the NMS radius to a better supported one and attaches the nearest landmark within reach.
///
/// Returned nodes are ordered by decreasing support, ties by voxel key.
pub fn detect_recon_targets(mesh: &TriangleMesh, landmarks: &[Landmark], cfg: &PlannerConfig) -> Vec<ReconNode> {
    let voxel = cfg.recon_cluster_voxel;
    let mut clusters: BTreeMap<[i64; 3], (Vec3, Vec3, usize)> = BTreeMap::new();
    for f in mesh.stretched_faces(cfg.recon_ratio_threshold) {
        let c = mesh.face_centroid(f);
        let e = clusters
            .entry(voxel_key(&c, voxel))
            .or_insert((Vec3::zeros(), Vec3::zeros(), 0));
        e.0 += c;
        e.1 += mesh.face_normal(f);
        e.2 += 1;
    }
    // BTreeMap iteration is key ordered, so the stable sort breaks count ties by key
    let mut list: Vec<(Vec3, Vec3, usize)> = clusters
        .into_values()
        .map(|(s, n, k)| {
            let mean_n = n / k as f64;
            let norm = mean_n.norm();
            (s / k as f64, if norm > 1e-9 { mean_n / norm } else { Vec3::zeros() }, k)
        })
        .collect();
    list.sort_by_key(|e| std::cmp::Reverse(e.2));
    let mut kept: Vec<(Vec3, Vec3, usize)> = Vec::new();
    for c in list {
        if kept.iter().all(|k| (k.0 - c.0).norm() > cfg.recon_nms_radius) {
            kept.push(c);
        }
    }
    kept.into_iter()
        .map(|(p, n, k)| {
            let landmark_id = landmarks
                .iter()
                .filter_map(|l| {
                    let d = (l.position() - p).norm();
                    (d <= cfg.recon_association_radius + l.radius).then_some((d, l.id))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, id)| id);
            ReconNode {
                position: [p.x, p.y, p.z],
                normal: [n.x, n.y, n.z],
                support: k,
                landmark_id,
            }
        })
        .collect()
}

fn visible_range(ctx: &PlanContext, eye: &Vec3) -> usize {
    let stride = ctx.config.recon_visible_stride.max(1);
    let offset = (ctx.seed % stride as u64) as usize;
    (offset..ctx.nav().len())
        .step_by(stride)
        .filter(|&c| !ctx.index.segment_blocked(eye, &ctx.lifted(c)))
        .count()
}

/// Chooses, per node, the ring position whose view pitch toward it best matches the pitch of
/// its inverted mean normal, walks there and orbits the node.
pub fn plan_recon_aware(ctx: &PlanContext, nodes: &[ReconNode]) -> Vec<Trajectory> {
    let Some(field) = ctx.field.as_ref() else {
        return Vec::new();
    };
    let cfg = ctx.config;
    let o = ctx.origin();
    let mut out = Vec::new();
    for node in nodes {
        if out.len() >= cfg.caps.recon_aware {
            break;
        }
        let target = node.point();
        let want = pitch_of(&-Vec3::from(node.normal));
        let ring = cfg.recon_ring_candidates.max(1);
        let mut scored: Vec<(f64, usize, Vec3)> = Vec::new();
        for k in 0..ring {
            let th = k as f64 * TAU / ring as f64;
            let probe = Vec3::new(
                target.x + cfg.recon_ring_radius * th.sin(),
                o.y,
                target.z + cfg.recon_ring_radius * th.cos(),
            );
            let Some(cell) = ctx.support_cell(&probe) else { continue };
            let eye = ctx.lifted(cell);
            if !ctx.center_ok(&eye) {
                continue;
            }
            let d = target - eye;
            let dist = d.norm();
            if dist <= 1e-9
                || ctx
                    .index
                    .raycast_within(&eye, &(d / dist), dist - cfg.recon_visibility_tol)
                    .is_some()
            {
                continue;
            }
            scored.push(((pitch_of(&d) - want).abs(), cell, eye));
        }
        let Some(best) = scored.iter().map(|s| s.0).min_by(f64::total_cmp) else {
            continue;
        };
        let tie = cfg.recon_tie_deg.to_radians();
        let tied: Vec<&(f64, usize, Vec3)> = scored.iter().filter(|s| s.0 <= best + tie).collect();
        let chosen = if tied.len() == 1 {
            tied[0]
        } else {
            let mut pick = tied[0];
            let mut pick_range = visible_range(ctx, &pick.2);
            for s in &tied[1..] {
                let r = visible_range(ctx, &s.2);
                if r > pick_range {
                    pick = s;
                    pick_range = r;
                }
            }
            pick
        };
        let (cell, eye) = (chosen.1, chosen.2);
        let path = shortest_path_cells(field, cell);
        if path.is_empty() {
            continue;
        }
        let mut pts = vec![o];
        pts.extend(path.iter().map(|&c| ctx.lifted(c)));
        let v = eye - target;
        let span = cfg.recon_orbit_span_deg.to_radians();
        let n = arc_steps(span, v.x.hypot(v.z), cfg.orbit_step_deg.to_radians(), cfg.max_step);
        for s in 1..=n {
            pts.push(target + yaw_pitch_rotation(span * s as f64 / n as f64, 0.0) * v);
        }
        let centers = densify(&pts, cfg.max_step);
        let lookats = vec![target; centers.len()];
        let t = Trajectory {
            mode: Mode::ReconAware,
            frames: ctx.frames(&centers, &lookats),
            landmark_id: node.landmark_id,
            iterative: true,
        };
        if let Some(t) = ctx.finish(t) {
            out.push(t);
        }
    }
    out
}
