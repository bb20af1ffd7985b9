use std::f64::consts::TAU;

use crate::geometry::Vec3;
use crate::navmesh::shortest_path_cells;
use crate::planner::{densify, Landmark, Mode, PlanContext, Trajectory};

/// Camera positions sampled on a horizontal circle around a landmark.
#[derive(Debug, Clone)]
pub struct SurroundingCandidates {
    pub center: Vec3,
    pub radius: f64,
    /// Camera center per candidate; `None` when no reachable cell supports it.
    pub positions: Vec<Option<Vec3>>,
    pub cells: Vec<Option<usize>>,
    pub valid: Vec<bool>,
    /// `links[k]` joins candidate `k` and `k + 1` (mod n).
    pub links: Vec<bool>,
}

impl SurroundingCandidates {
    pub fn new(ctx: &PlanContext, landmark: &Landmark) -> SurroundingCandidates {
        let cfg = ctx.config;
        let c = landmark.position();
        let radius = cfg.surround_r_min.max(cfg.surround_k_fov * landmark.radius);
        let n = cfg.surround_candidates.max(3);
        let o = ctx.origin();
        let mut positions = Vec::with_capacity(n);
        let mut cells = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for k in 0..n {
            let th = k as f64 * TAU / n as f64;
            let probe = Vec3::new(c.x + radius * th.sin(), o.y, c.z + radius * th.cos());
            let cell = ctx.support_cell(&probe);
            let pos = cell.map(|s| ctx.lifted(s));
            let ok = pos.is_some_and(|p| ctx.center_ok(&p) && sees(ctx, &p, &c, landmark.radius));
            positions.push(pos);
            cells.push(cell);
            valid.push(ok);
        }
        let links = (0..n)
            .map(|k| {
                let b = (k + 1) % n;
                valid[k]
                    && valid[b]
                    && ctx.segment_ok(
                        &positions[k].expect("valid nodes have positions"),
                        &positions[b].expect("valid nodes have positions"),
                    )
            })
            .collect();
        SurroundingCandidates {
            center: c,
            radius,
            positions,
            cells,
            valid,
            links,
        }
    }

    /// Longest chain of linked candidates as indices in increasing angle order.
    ///
    /// A closed loop returns all `n` indices; ties go to the chain starting at the lowest index.
    pub fn longest_run(&self) -> Vec<usize> {
        longest_run(&self.valid, &self.links)
    }
}

fn sees(ctx: &PlanContext, p: &Vec3, c: &Vec3, radius: f64) -> bool {
    let d = c - p;
    let dist = d.norm();
    if dist <= 1e-9 {
        return false;
    }
    ctx.index.raycast_within(p, &(d / dist), dist - radius).is_none()
}

pub(crate) fn longest_run(valid: &[bool], links: &[bool]) -> Vec<usize> {
    let n = valid.len();
    if n == 0 {
        return Vec::new();
    }
    if links.iter().all(|l| *l) {
        return (0..n).collect();
    }
    let mut best: Vec<usize> = Vec::new();
    for s in 0..n {
        // a chain starts where the incoming link is missing
        if !valid[s] || links[(s + n - 1) % n] {
            continue;
        }
        let mut run = vec![s];
        let mut k = s;
        while links[k] {
            k = (k + 1) % n;
            run.push(k);
        }
        if run.len() > best.len() {
            best = run;
        }
    }
    best
}

fn horizontal_angle(a: &Vec3, b: &Vec3) -> f64 {
    let (ax, az, bx, bz) = (a.x, a.z, b.x, b.z);
    let na = ax.hypot(az);
    let nb = bx.hypot(bz);
    if na <= 1e-12 || nb <= 1e-12 {
        return 0.0;
    }
    ((ax * bx + az * bz) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Drops end nodes whose travel heading deviates from the circle tangent by more than
/// `max_angle`. Nodes are ordered by increasing angle around `center`; at least two remain.
pub fn prune_tails(nodes: &[Vec3], center: &Vec3, max_angle: f64) -> (usize, usize) {
    let tangent = |p: &Vec3| {
        let r = p - center;
        Vec3::new(r.z, 0.0, -r.x)
    };
    let (mut s, mut e) = (0, nodes.len());
    while e - s > 2 && horizontal_angle(&(nodes[s + 1] - nodes[s]), &tangent(&nodes[s])) > max_angle {
        s += 1;
    }
    while e - s > 2 && horizontal_angle(&(nodes[e - 1] - nodes[e - 2]), &tangent(&nodes[e - 1])) > max_angle {
        e -= 1;
    }
    (s, e)
}

/// Arcs around each landmark, reached from the panorama center by the shortest navigation path.
pub fn plan_surrounding(ctx: &PlanContext) -> Vec<Trajectory> {
    let Some(field) = ctx.field.as_ref() else {
        return Vec::new();
    };
    let mut landmarks: Vec<&Landmark> = ctx.scene.landmarks.iter().collect();
    landmarks.sort_by_key(|l| l.id);
    let mut out = Vec::new();
    for lm in landmarks {
        let cand = SurroundingCandidates::new(ctx, lm);
        let run = cand.longest_run();
        if run.len() < 2 {
            continue;
        }
        let n = cand.valid.len();
        let pos = |k: usize| cand.positions[k].expect("run nodes are valid");
        let mut arc: Vec<usize> = if cand.links.iter().all(|l| *l) {
            let o = ctx.origin();
            let s = (0..n)
                .min_by(|&a, &b| (pos(a) - o).norm().total_cmp(&(pos(b) - o).norm()).then(a.cmp(&b)))
                .expect("non-empty loop");
            let mut v: Vec<usize> = (0..=n).map(|k| (s + k) % n).collect();
            v.dedup();
            v
        } else {
            let nodes: Vec<Vec3> = run.iter().map(|&k| pos(k)).collect();
            let (s, e) = prune_tails(&nodes, &cand.center, ctx.config.tail_prune_deg.to_radians());
            run[s..e].to_vec()
        };
        let first = cand.cells[arc[0]].expect("run nodes have cells");
        let last = cand.cells[*arc.last().expect("non-empty arc")].expect("run nodes have cells");
        if field.distance[last] < field.distance[first] {
            arc.reverse();
        }
        let entry = cand.cells[arc[0]].expect("run nodes have cells");
        let path = shortest_path_cells(field, entry);
        if path.is_empty() {
            continue;
        }
        let mut pts = vec![ctx.origin()];
        pts.extend(path.iter().map(|&c| ctx.lifted(c)));
        pts.extend(arc.iter().map(|&k| pos(k)));
        let centers = densify(&pts, ctx.config.max_step);
        let lookats = vec![cand.center; centers.len()];
        let t = Trajectory {
            mode: Mode::Surrounding,
            frames: ctx.frames(&centers, &lookats),
            landmark_id: Some(lm.id),
            iterative: false,
        };
        if let Some(t) = ctx.finish(t) {
            out.push(t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_wrap_and_break_ties_low() {
        let valid = vec![true; 8];
        // links missing after 2 and after 6: runs 3..=6 (4 nodes) and 7,0,1,2 (4 nodes)
        let mut links = vec![true; 8];
        links[2] = false;
        links[6] = false;
        assert_eq!(longest_run(&valid, &links), vec![3, 4, 5, 6]);
        links[6] = true;
        links[5] = false;
        assert_eq!(longest_run(&valid, &links), vec![6, 7, 0, 1, 2]);
        assert_eq!(longest_run(&valid, &[true; 8]).len(), 8);
    }

    #[test]
    fn tails_with_sharp_turns_are_pruned() {
        let c = Vec3::zeros();
        let mut nodes: Vec<Vec3> = (0..10)
            .map(|k| {
                let th = k as f64 * 0.1;
                Vec3::new(2.0 * th.sin(), 0.0, 2.0 * th.cos())
            })
            .collect();
        assert_eq!(prune_tails(&nodes, &c, 45f64.to_radians()), (0, 10));
        // first node pulled inward so the first step heads outward
        nodes[0] = Vec3::new(0.19, 0.0, 1.0);
        nodes[9] = nodes[8] + Vec3::new(0.0, 0.0, 0.3);
        let (s, e) = prune_tails(&nodes, &c, 45f64.to_radians());
        assert_eq!((s, e), (1, 9));
    }
}
