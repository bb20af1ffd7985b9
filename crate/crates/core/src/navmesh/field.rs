use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::navmesh::NavMesh;

/// Single-source geodesic distances over a [`NavMesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub source: usize,
    /// Meters; `f64::INFINITY` for unreachable cells.
    pub distance: Vec<f64>,
    pub predecessor: Vec<Option<usize>>,
}

impl DistanceField {
    pub fn reachable(&self, c: usize) -> bool {
        self.distance[c].is_finite()
    }

    /// Reachable cell with the largest distance; ties go to the lower index.
    pub fn farthest(&self) -> usize {
        let mut best = self.source;
        for (c, d) in self.distance.iter().enumerate() {
            if d.is_finite() && *d > self.distance[best] {
                best = c;
            }
        }
        best
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on (distance, index)
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[inline]
pub(crate) fn edge_length(nav: &NavMesh, a: usize, b: usize) -> f64 {
    (nav.position(a) - nav.position(b)).norm()
}

/// Dijkstra with Euclidean edge weights between cell centers.
///
/// Among equally short routes the predecessor with the lower cell index is kept.
pub fn dijkstra_field(nav: &NavMesh, source: usize) -> Result<DistanceField> {
    let n = nav.len();
    if source >= n {
        return Err(Error::invalid(format!(
            "source cell {source} out of range for {n} cells"
        )));
    }
    let mut distance = vec![f64::INFINITY; n];
    let mut predecessor: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    distance[source] = 0.0;
    heap.push(Entry(0.0, source));
    while let Some(Entry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &v in nav.neighbors(u) {
            if done[v] {
                continue;
            }
            let nd = d + edge_length(nav, u, v);
            if nd < distance[v] {
                distance[v] = nd;
                predecessor[v] = Some(u);
                heap.push(Entry(nd, v));
            } else if nd == distance[v] && predecessor[v].is_some_and(|p| u < p) {
                predecessor[v] = Some(u);
            }
        }
    }
    Ok(DistanceField {
        source,
        distance,
        predecessor,
    })
}

/// Cell centers from the field source to `target`; empty when unreachable.
pub fn shortest_path(field: &DistanceField, nav: &NavMesh, target: usize) -> Vec<Vec3> {
    shortest_path_cells(field, target)
        .into_iter()
        .map(|c| nav.position(c))
        .collect()
}

/// Cell indices from the field source to `target`; empty when unreachable.
pub fn shortest_path_cells(field: &DistanceField, target: usize) -> Vec<usize> {
    if target >= field.distance.len() || !field.reachable(target) {
        return Vec::new();
    }
    let mut path = vec![target];
    let mut c = target;
    while let Some(p) = field.predecessor[c] {
        path.push(p);
        c = p;
    }
    path.reverse();
    path
}
