use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{elevation, MeshIndex, TriangleMesh, Vec3, UP};
use crate::navmesh::{Cell, NavMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavMeshParams {
    pub cell_size: f64,
    pub agent_height: f64,
    /// Maximum ground tilt from horizontal, radians.
    pub max_slope: f64,
    /// Step limit as a fraction of `agent_height`.
    pub step_ratio: f64,
}

impl Default for NavMeshParams {
    fn default() -> Self {
        NavMeshParams {
            cell_size: 0.25,
            agent_height: 1.6,
            max_slope: std::f64::consts::FRAC_PI_4,
            step_ratio: 0.3,
        }
    }
}

impl NavMeshParams {
    pub fn step_height(&self) -> f64 {
        self.step_ratio * self.agent_height
    }

    /// Height above ground used for free-space and line-of-sight probes.
    pub(crate) fn probe_height(&self) -> f64 {
        0.5 * self.agent_height
    }
}

/// Rasterizes the walkable surfaces of `mesh` onto a horizontal grid.
///
/// A vertical line through each column center collects every surface crossing. A crossing
/// is walkable when its face tilts at most `max_slope` from horizontal and faces up, the
/// next surface above is at least `agent_height` away and the point half an agent height
/// above it is in free space. Neighboring cells (8-connected) are linked when their height
/// difference is within the step limit and the straight line between their probe points
/// does not cross the mesh.
pub fn build_navmesh(mesh: &TriangleMesh, params: &NavMeshParams) -> Result<NavMesh> {
    let index = MeshIndex::new(mesh);
    build_navmesh_indexed(mesh, &index, params)
}

pub(crate) fn build_navmesh_indexed(mesh: &TriangleMesh, index: &MeshIndex, params: &NavMeshParams) -> Result<NavMesh> {
    let cs = params.cell_size;
    if !(cs > 0.0 && cs.is_finite()) {
        return Err(Error::invalid(format!("cell_size must be positive, got {cs}")));
    }
    if !(params.agent_height > 0.0) || !(0.0..=std::f64::consts::FRAC_PI_2).contains(&params.max_slope) {
        return Err(Error::invalid(
            "agent_height must be positive and max_slope within [0, pi/2]",
        ));
    }
    let Some(bounds) = mesh.bounds() else {
        return Ok(NavMesh::empty(cs, [0.0, 0.0]));
    };
    let origin = [bounds.min.x, bounds.min.z];
    let ext = bounds.extent();
    let nx = ((ext.x / cs) - 1e-9).ceil().max(1.0) as i32;
    let nz = ((ext.z / cs) - 1e-9).ceil().max(1.0) as i32;
    // start above the highest point (smallest y) and cast along +y, which is down
    let top = bounds.min.y - 1.0;
    let cos_slope = params.max_slope.cos();
    let probe = params.probe_height();

    let mut cells = Vec::new();
    for j in 0..nz {
        for i in 0..nx {
            let x = origin[0] + (i as f64 + 0.5) * cs;
            let z = origin[1] + (j as f64 + 0.5) * cs;
            let o = Vec3::new(x, top, z);
            let hits = index.intersect_all(&o, &Vec3::y());
            let mut last_t = f64::NEG_INFINITY;
            for h in &hits {
                // coincident crossings (shared edges) count once
                if h.t - last_t <= 1e-9 {
                    continue;
                }
                let above = h.t - last_t;
                last_t = h.t;
                let n = index.normal(h.face);
                if n.dot(&UP) < cos_slope - 1e-12 {
                    continue;
                }
                if above < params.agent_height {
                    continue;
                }
                let ground = o + Vec3::y() * h.t;
                if !index.point_in_free_space(&(ground + UP * probe)) {
                    continue;
                }
                cells.push(Cell {
                    i,
                    j,
                    center: [ground.x, ground.y, ground.z],
                });
            }
        }
    }
    let adjacency = link_cells(&cells, index, params);
    let nav = NavMesh::from_parts(cs, origin, cells, adjacency);
    nav.check_invariants()?;
    Ok(nav)
}

pub(crate) fn link_cells(cells: &[Cell], index: &MeshIndex, params: &NavMeshParams) -> Vec<Vec<usize>> {
    let mut columns: HashMap<(i32, i32), Vec<usize>> = HashMap::new();
    for (k, c) in cells.iter().enumerate() {
        columns.entry((c.i, c.j)).or_default().push(k);
    }
    let step = params.step_height();
    let probe = params.probe_height();
    let mut adjacency = vec![Vec::new(); cells.len()];
    for (a, c) in cells.iter().enumerate() {
        let pa = c.position();
        for dj in -1..=1 {
            for di in -1..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let Some(col) = columns.get(&(c.i + di, c.j + dj)) else {
                    continue;
                };
                for &b in col {
                    let pb = cells[b].position();
                    if (elevation(&pa) - elevation(&pb)).abs() > step {
                        continue;
                    }
                    if index.segment_blocked(&(pa + UP * probe), &(pb + UP * probe)) {
                        continue;
                    }
                    adjacency[a].push(b);
                }
            }
        }
    }
    // keep symmetry even if a probe ray grazes an edge in one direction only
    let mut sym = vec![Vec::new(); cells.len()];
    for (a, nb) in adjacency.iter().enumerate() {
        for &b in nb {
            if adjacency[b].contains(&a) {
                sym[a].push(b);
            }
        }
    }
    for nb in &mut sym {
        nb.sort_unstable();
        nb.dedup();
    }
    sym
}
