//! Grid navigation mesh over walkable mesh surfaces, with refinement and shortest paths.

pub(crate) mod build;
mod field;
pub(crate) mod refine;

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub use build::{build_navmesh, NavMeshParams};
pub use field::{dijkstra_field, shortest_path, shortest_path_cells, DistanceField};
pub use refine::{bridge_islands, erode, refine_navmesh, snap_to_ground, RefineParams};

/// One walkable grid cell; `center` lies on the ground surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub i: i32,
    pub j: i32,
    pub center: [f64; 3],
}

impl Cell {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.center)
    }
}

/// Walkable cells on a horizontal (x, z) grid with symmetric adjacency.
///
/// Grid cell `(i, j)` spans `x in origin[0] + [i, i + 1) * cell_size` and
/// `z in origin[1] + [j, j + 1) * cell_size`. Several cells may share a column when
/// floors are stacked.
#[derive(Debug, Clone, PartialEq)]
pub struct NavMesh {
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub cells: Vec<Cell>,
    adjacency: Vec<Vec<usize>>,
    bridges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct NavMeshJson {
    cell_size: f64,
    origin: [f64; 2],
    cells: Vec<Cell>,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bridges: Vec<[usize; 2]>,
}

impl NavMesh {
    /// Builds a mesh from an undirected edge list; `bridges` are extra edges between islands.
    pub fn new(cell_size: f64, origin: [f64; 2], cells: Vec<Cell>, edges: &[[usize; 2]]) -> Result<NavMesh> {
        Self::with_bridges(cell_size, origin, cells, edges, &[])
    }

    pub fn with_bridges(
        cell_size: f64,
        origin: [f64; 2],
        cells: Vec<Cell>,
        edges: &[[usize; 2]],
        bridges: &[[usize; 2]],
    ) -> Result<NavMesh> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::invalid(format!("cell_size must be positive, got {cell_size}")));
        }
        let n = cells.len();
        let mut sets = vec![BTreeSet::new(); n];
        for &[a, b] in edges.iter().chain(bridges) {
            if a >= n || b >= n || a == b {
                return Err(Error::invalid(format!("bad navmesh edge [{a}, {b}] for {n} cells")));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        let mut br: Vec<[usize; 2]> = bridges.iter().map(|&[a, b]| [a.min(b), a.max(b)]).collect();
        br.sort_unstable();
        br.dedup();
        let nav = NavMesh {
            cell_size,
            origin,
            cells,
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            bridges: br,
        };
        nav.check_invariants()?;
        Ok(nav)
    }

    pub fn empty(cell_size: f64, origin: [f64; 2]) -> NavMesh {
        NavMesh {
            cell_size,
            origin,
            cells: Vec::new(),
            adjacency: Vec::new(),
            bridges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn position(&self, c: usize) -> Vec3 {
        self.cells[c].position()
    }

    /// Sorted neighbor indices of cell `c`.
    pub fn neighbors(&self, c: usize) -> &[usize] {
        &self.adjacency[c]
    }

    /// Bridging edges as `[low, high]` index pairs.
    pub fn bridges(&self) -> &[[usize; 2]] {
        &self.bridges
    }

    pub fn is_bridge(&self, a: usize, b: usize) -> bool {
        self.bridges.binary_search(&[a.min(b), a.max(b)]).is_ok()
    }

    /// Undirected edges `[a, b]` with `a < b`, bridges included, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut e = Vec::new();
        for (a, nb) in self.adjacency.iter().enumerate() {
            for &b in nb {
                if a < b {
                    e.push([a, b]);
                }
            }
        }
        e
    }

    /// Grid column containing a world point.
    pub fn grid_index(&self, p: &Vec3) -> (i32, i32) {
        (
            ((p.x - self.origin[0]) / self.cell_size).floor() as i32,
            ((p.z - self.origin[1]) / self.cell_size).floor() as i32,
        )
    }

    /// Cell closest to `p` horizontally, preferring cells below `p`, then lower vertical
    /// distance, then lower index.
    pub fn nearest_cell(&self, p: &Vec3) -> Option<usize> {
        let key = |c: usize| {
            let q = self.position(c);
            let h = (q.x - p.x).hypot(q.z - p.z);
            let below = crate::geometry::elevation(&q) <= crate::geometry::elevation(p) + 1e-9;
            (h, !below, (q.y - p.y).abs(), c)
        };
        (0..self.cells.len()).min_by(|&a, &b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
                .then(ka.3.cmp(&kb.3))
        })
    }

    /// Cells located in grid column `(i, j)`.
    pub fn column_map(&self) -> HashMap<(i32, i32), Vec<usize>> {
        let mut m: HashMap<(i32, i32), Vec<usize>> = HashMap::new();
        for (k, c) in self.cells.iter().enumerate() {
            m.entry((c.i, c.j)).or_default().push(k);
        }
        m
    }

    /// Connected-component label per cell, labels in order of lowest member index.
    pub fn components(&self) -> Vec<usize> {
        let n = self.cells.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Symmetric adjacency, valid indices and neighbor distance for non-bridge edges.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.cells.len();
        if self.adjacency.len() != n {
            return Err(Error::Invariant("adjacency length differs from cell count".into()));
        }
        let limit = std::f64::consts::SQRT_2 * self.cell_size * (1.0 + 1e-9);
        for (a, nb) in self.adjacency.iter().enumerate() {
            for &b in nb {
                if b >= n || b == a || self.adjacency[b].binary_search(&a).is_err() {
                    return Err(Error::Invariant(format!("adjacency not symmetric at ({a}, {b})")));
                }
                if !self.is_bridge(a, b) {
                    let (p, q) = (self.position(a), self.position(b));
                    if (p.x - q.x).hypot(p.z - q.z) > limit {
                        return Err(Error::Invariant(format!(
                            "neighbors {a} and {b} are farther than one diagonal"
                        )));
                    }
                }
            }
        }
        if self.cells.iter().any(|c| !c.center.iter().all(|v| v.is_finite())) {
            return Err(Error::Invariant("cell centers must be finite".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let all = self.edges();
        let edges: Vec<[usize; 2]> = all.into_iter().filter(|&[a, b]| !self.is_bridge(a, b)).collect();
        let j = NavMeshJson {
            cell_size: self.cell_size,
            origin: self.origin,
            cells: self.cells.clone(),
            edges,
            bridges: self.bridges.clone(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<NavMesh> {
        let j: NavMeshJson = serde_json::from_str(s)?;
        NavMesh::with_bridges(j.cell_size, j.origin, j.cells, &j.edges, &j.bridges)
    }

    /// Keeps the cells flagged in `keep`, renumbering in order; edges to dropped cells vanish.
    pub fn retain(&self, keep: &[bool]) -> NavMesh {
        let mut remap = vec![usize::MAX; self.cells.len()];
        let mut cells = Vec::new();
        for (k, c) in self.cells.iter().enumerate() {
            if keep[k] {
                remap[k] = cells.len();
                cells.push(c.clone());
            }
        }
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .filter(|(k, _)| keep[*k])
            .map(|(_, nb)| nb.iter().filter(|b| keep[**b]).map(|b| remap[*b]).collect())
            .collect();
        let bridges = self
            .bridges
            .iter()
            .filter(|[a, b]| keep[*a] && keep[*b])
            .map(|[a, b]| [remap[*a], remap[*b]])
            .collect();
        NavMesh {
            cell_size: self.cell_size,
            origin: self.origin,
            cells,
            adjacency,
            bridges,
        }
    }

    pub(crate) fn add_bridge(&mut self, a: usize, b: usize) {
        let key = [a.min(b), a.max(b)];
        if let Err(pos) = self.bridges.binary_search(&key) {
            if self.adjacency[a].binary_search(&b).is_ok() {
                return;
            }
            self.bridges.insert(pos, key);
            for (x, y) in [(a, b), (b, a)] {
                let nb = &mut self.adjacency[x];
                let p = nb.binary_search(&y).unwrap_err();
                nb.insert(p, y);
            }
        }
    }

    pub(crate) fn set_center(&mut self, c: usize, p: Vec3) {
        self.cells[c].center = [p.x, p.y, p.z];
    }

    pub(crate) fn from_parts(
        cell_size: f64,
        origin: [f64; 2],
        cells: Vec<Cell>,
        adjacency: Vec<Vec<usize>>,
    ) -> NavMesh {
        NavMesh {
            cell_size,
            origin,
            cells,
            adjacency,
            bridges: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> NavMesh {
        let cells = (0..n)
            .map(|k| Cell {
                i: k as i32,
                j: 0,
                center: [k as f64 + 0.5, 0.0, 0.5],
            })
            .collect();
        let edges: Vec<[usize; 2]> = (1..n).map(|k| [k - 1, k]).collect();
        NavMesh::new(1.0, [0.0, 0.0], cells, &edges).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let mut nav = line(4);
        nav.add_bridge(0, 3);
        let s = nav.to_json().unwrap();
        let back = NavMesh::from_json(&s).unwrap();
        assert_eq!(back, nav);
        assert!(back.is_bridge(3, 0));
    }

    #[test]
    fn rejects_long_plain_edges() {
        let nav = line(3);
        assert!(NavMesh::new(1.0, [0.0, 0.0], nav.cells.clone(), &[[0, 2]]).is_err());
        assert!(NavMesh::with_bridges(1.0, [0.0, 0.0], nav.cells, &[], &[[0, 2]]).is_ok());
    }

    #[test]
    fn retain_and_components() {
        let nav = line(5);
        assert_eq!(nav.component_count(), 1);
        let cut = nav.retain(&[true, true, false, true, true]);
        assert_eq!(cut.len(), 4);
        assert_eq!(cut.components(), vec![0, 0, 1, 1]);
        cut.check_invariants().unwrap();
    }

    #[test]
    fn nearest_cell_prefers_below() {
        let cells = vec![
            Cell {
                i: 0,
                j: 0,
                center: [0.5, -3.0, 0.5],
            },
            Cell {
                i: 0,
                j: 0,
                center: [0.5, 1.0, 0.5],
            },
        ];
        let nav = NavMesh::new(1.0, [0.0, 0.0], cells, &[]).unwrap();
        assert_eq!(nav.nearest_cell(&Vec3::new(0.5, 0.0, 0.5)), Some(1));
    }
}
