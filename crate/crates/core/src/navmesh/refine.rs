use std::collections::HashMap;

use crate::geometry::{elevation, MeshIndex, TriangleMesh, Vec3, UP};
use crate::navmesh::NavMesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    /// Cells within this horizontal distance of a non-walkable boundary are removed.
    pub erosion_radius: f64,
    /// Largest gap between islands that a bridge may span.
    pub bridge_gap: f64,
    /// Snap rays start this far above the current center.
    pub snap_lift: f64,
    /// Cells with no ground hit within this distance below the lifted start are dropped.
    pub max_snap: f64,
    /// Bridge endpoints must see each other at `probe_height` above ground.
    pub require_visibility: bool,
    pub probe_height: f64,
    pub max_step: f64,
    pub max_slope: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            erosion_radius: 0.0,
            bridge_gap: 0.5,
            snap_lift: 0.25,
            max_snap: 1.0,
            require_visibility: true,
            probe_height: 0.8,
            max_step: 0.48,
            max_slope: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Snaps cells to the ground, erodes the walkable boundary and bridges nearby islands.
pub fn refine_navmesh(nav: &NavMesh, mesh: &TriangleMesh, params: &RefineParams) -> NavMesh {
    let index = MeshIndex::new(mesh);
    refine_navmesh_indexed(nav, &index, params)
}

pub(crate) fn refine_navmesh_indexed(nav: &NavMesh, index: &MeshIndex, params: &RefineParams) -> NavMesh {
    let snapped = snap_to_ground(nav, index, params);
    let eroded = erode(&snapped, params.erosion_radius);
    bridge_islands(&eroded, index, params)
}

/// Re-places every center at the first up-facing surface below it; cells without ground
/// within reach are removed.
pub fn snap_to_ground(nav: &NavMesh, index: &MeshIndex, params: &RefineParams) -> NavMesh {
    let cos_slope = params.max_slope.cos();
    let mut out = nav.clone();
    let mut keep = vec![true; nav.len()];
    for c in 0..nav.len() {
        let start = nav.position(c) + UP * params.snap_lift;
        let reach = params.snap_lift + params.max_snap;
        let ground = index
            .intersect_all(&start, &Vec3::y())
            .into_iter()
            .take_while(|h| h.t <= reach)
            .find(|h| index.normal(h.face).dot(&UP) >= cos_slope - 1e-12);
        match ground {
            Some(h) => out.set_center(c, start + Vec3::y() * h.t),
            None => keep[c] = false,
        }
    }
    if keep.iter().all(|k| *k) {
        out
    } else {
        out.retain(&keep)
    }
}

const OFFSETS: [(i32, i32); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Removes cells closer than `radius` to the walkable boundary.
///
/// The boundary is sampled at the grid positions of missing 8-neighbors; the distance to
/// the boundary is the distance to such a position minus half a cell, so a zero radius
/// keeps every cell.
pub fn erode(nav: &NavMesh, radius: f64) -> NavMesh {
    if radius <= 0.0 || nav.is_empty() {
        return nav.clone();
    }
    let cs = nav.cell_size;
    let mut obstacles: Vec<(f64, f64)> = Vec::new();
    for c in 0..nav.len() {
        let cell = &nav.cells[c];
        let mut present = [false; 8];
        for &b in nav.neighbors(c) {
            let o = &nav.cells[b];
            if let Some(k) = OFFSETS.iter().position(|&d| d == (o.i - cell.i, o.j - cell.j)) {
                present[k] = true;
            }
        }
        for (k, &(di, dj)) in OFFSETS.iter().enumerate() {
            if !present[k] {
                obstacles.push((
                    nav.origin[0] + (cell.i + di) as f64 * cs + 0.5 * cs,
                    nav.origin[1] + (cell.j + dj) as f64 * cs + 0.5 * cs,
                ));
            }
        }
    }
    let reach = radius + 0.5 * cs;
    let bucket = reach.max(cs);
    let key = |x: f64, z: f64| ((x / bucket).floor() as i64, (z / bucket).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<(f64, f64)>> = HashMap::new();
    for &(x, z) in &obstacles {
        grid.entry(key(x, z)).or_default().push((x, z));
    }
    let keep: Vec<bool> = (0..nav.len())
        .map(|c| {
            let p = nav.position(c);
            let (bx, bz) = key(p.x, p.z);
            for dz in -1..=1 {
                for dx in -1..=1 {
                    if let Some(list) = grid.get(&(bx + dx, bz + dz)) {
                        for &(x, z) in list {
                            if (x - p.x).hypot(z - p.z) - 0.5 * cs < radius {
                                return false;
                            }
                        }
                    }
                }
            }
            true
        })
        .collect();
    nav.retain(&keep)
}

/// Adds one edge between the nearest boundary cells of every pair of islands whose gap is at
/// most `bridge_gap`. The gap is the center distance minus one cell.
pub fn bridge_islands(nav: &NavMesh, index: &MeshIndex, params: &RefineParams) -> NavMesh {
    let labels = nav.components();
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut out = nav.clone();
    if count < 2 {
        return out;
    }
    let mut boundary: Vec<Vec<usize>> = vec![Vec::new(); count];
    for c in 0..nav.len() {
        if nav.neighbors(c).len() < 8 {
            boundary[labels[c]].push(c);
        }
    }
    let max_center = params.bridge_gap + nav.cell_size;
    for a in 0..count {
        for b in a + 1..count {
            let mut best: Option<(f64, usize, usize)> = None;
            for &p in &boundary[a] {
                let pp = nav.position(p);
                for &q in &boundary[b] {
                    let pq = nav.position(q);
                    if (elevation(&pp) - elevation(&pq)).abs() > params.max_step {
                        continue;
                    }
                    let d = (pp - pq).norm();
                    if d > max_center + 1e-9 {
                        continue;
                    }
                    if params.require_visibility
                        && index.segment_blocked(&(pp + UP * params.probe_height), &(pq + UP * params.probe_height))
                    {
                        continue;
                    }
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, p, q));
                    }
                }
            }
            if let Some((_, p, q)) = best {
                out.add_bridge(p, q);
            }
        }
    }
    out
}
