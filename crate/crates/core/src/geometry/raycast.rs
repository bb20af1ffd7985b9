//! Ray/mesh queries: a brute-force reference and a bounding-volume hierarchy.

use crate::geometry::{Aabb, TriangleMesh, Vec3};

/// Self-intersection guard: hits at `t <= RAY_EPS` are ignored.
pub const RAY_EPS: f64 = 1e-4;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face: usize,
}

impl Hit {
    #[inline]
    fn better_than(&self, o: &Hit) -> bool {
        self.t < o.t || (self.t == o.t && self.face < o.face)
    }
}

/// Watertight ray/triangle test. Returns the ray parameter of the hit, both sides counted.
pub fn intersect_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let ad = dir.abs();
    let kz = if ad.x >= ad.y && ad.x >= ad.z {
        0
    } else if ad.y >= ad.z {
        1
    } else {
        2
    };
    let mut kx = (kz + 1) % 3;
    let mut ky = (kx + 1) % 3;
    if dir[kz] < 0.0 {
        std::mem::swap(&mut kx, &mut ky);
    }
    if dir[kz] == 0.0 {
        return None;
    }
    let sx = dir[kx] / dir[kz];
    let sy = dir[ky] / dir[kz];
    let sz = 1.0 / dir[kz];
    let a = tri[0] - origin;
    let b = tri[1] - origin;
    let c = tri[2] - origin;
    let (ax, ay) = (a[kx] - sx * a[kz], a[ky] - sy * a[kz]);
    let (bx, by) = (b[kx] - sx * b[kz], b[ky] - sy * b[kz]);
    let (cx, cy) = (c[kx] - sx * c[kz], c[ky] - sy * c[kz]);
    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t = (u * sz * a[kz] + v * sz * b[kz] + w * sz * c[kz]) / det;
    t.is_finite().then_some(t)
}

/// Nearest hit with `t > RAY_EPS` by testing every face; ties go to the lowest face index.
pub fn raycast(mesh: &TriangleMesh, origin: &Vec3, direction: &Vec3) -> Option<Hit> {
    debug_assert!((direction.norm() - 1.0).abs() <= 1e-6);
    let mut best: Option<Hit> = None;
    for f in 0..mesh.faces.len() {
        if let Some(t) = intersect_triangle(origin, direction, &mesh.triangle(f)) {
            if t > RAY_EPS {
                let h = Hit { t, face: f };
                if best.is_none_or(|b| h.better_than(&b)) {
                    best = Some(h);
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // leaf: faces[start..start + count]; inner: children at `start` and `start + 1`
    start: usize,
    count: usize,
}

/// Median-split BVH over a triangle mesh.
#[derive(Debug, Clone)]
pub struct MeshIndex {
    tris: Vec<[Vec3; 3]>,
    normals: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl MeshIndex {
    pub fn new(mesh: &TriangleMesh) -> MeshIndex {
        let tris: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let normals = (0..mesh.faces.len()).map(|f| mesh.face_normal(f)).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            nodes.push(Node {
                bounds: tri_bounds(&tris, &order),
                start: 0,
                count: tris.len(),
            });
            let mut stack = vec![0usize];
            while let Some(ni) = stack.pop() {
                let (start, count) = (nodes[ni].start, nodes[ni].count);
                if count <= LEAF_SIZE {
                    continue;
                }
                let slice = &mut order[start..start + count];
                let cb = Aabb::from_points(slice.iter().map(|&i| &centroids[i])).unwrap();
                let ext = cb.extent();
                let axis = if ext.x >= ext.y && ext.x >= ext.z {
                    0
                } else if ext.y >= ext.z {
                    1
                } else {
                    2
                };
                let mid = count / 2;
                slice.select_nth_unstable_by(mid, |&a, &b| {
                    centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
                });
                let left = Node {
                    bounds: tri_bounds(&tris, &order[start..start + mid]),
                    start,
                    count: mid,
                };
                let right = Node {
                    bounds: tri_bounds(&tris, &order[start + mid..start + count]),
                    start: start + mid,
                    count: count - mid,
                };
                let li = nodes.len();
                nodes.push(left);
                nodes.push(right);
                nodes[ni].start = li;
                nodes[ni].count = 0;
                stack.push(li);
                stack.push(li + 1);
            }
        }
        MeshIndex {
            tris,
            normals,
            order,
            nodes,
        }
    }

    pub fn face_count(&self) -> usize {
        self.tris.len()
    }

    /// Unit normal of face `f`.
    pub fn normal(&self, f: usize) -> Vec3 {
        self.normals[f]
    }

    /// Nearest hit with `RAY_EPS < t <= max_t`; ties go to the lowest face index.
    pub fn raycast_within(&self, origin: &Vec3, dir: &Vec3, max_t: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let inv = dir.map(|c| 1.0 / c);
        self.traverse(
            origin,
            &inv,
            &mut best,
            |best, t_entry| best.map_or(max_t, |b| b.t) >= t_entry,
            |best, f| {
                if let Some(t) = intersect_triangle(origin, dir, &self.tris[f]) {
                    if t > RAY_EPS && t <= max_t {
                        let h = Hit { t, face: f };
                        if best.is_none_or(|b| h.better_than(&b)) {
                            *best = Some(h);
                        }
                    }
                }
            },
        );
        best
    }

    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        self.raycast_within(origin, dir, f64::INFINITY)
    }

    /// Every hit with `t > RAY_EPS`, sorted by `(t, face)`.
    pub fn intersect_all(&self, origin: &Vec3, dir: &Vec3) -> Vec<Hit> {
        let mut hits = Vec::new();
        let inv = dir.map(|c| 1.0 / c);
        self.traverse(
            origin,
            &inv,
            &mut hits,
            |_, _| true,
            |hits, f| {
                if let Some(t) = intersect_triangle(origin, dir, &self.tris[f]) {
                    if t > RAY_EPS {
                        hits.push(Hit { t, face: f });
                    }
                }
            },
        );
        hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.face.cmp(&b.face)));
        hits
    }

    fn traverse<S>(
        &self,
        origin: &Vec3,
        inv: &Vec3,
        state: &mut S,
        keep: impl Fn(&S, f64) -> bool,
        mut leaf: impl FnMut(&mut S, usize),
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let Some(t_entry) = slab(&node.bounds, origin, inv) else {
                continue;
            };
            if !keep(state, t_entry) {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start..node.start + node.count] {
                    leaf(state, f);
                }
            } else {
                stack.push(node.start + 1);
                stack.push(node.start);
            }
        }
    }

    /// Distance from `p` to the closest point on the mesh; infinite for an empty mesh.
    pub fn distance(&self, p: &Vec3) -> f64 {
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if box_distance_sq(&node.bounds, p) >= best * best {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start..node.start + node.count] {
                    let q = closest_point_triangle(p, &self.tris[f]);
                    best = best.min((q - p).norm());
                }
            } else {
                let (a, b) = (node.start, node.start + 1);
                let da = box_distance_sq(&self.nodes[a].bounds, p);
                let db = box_distance_sq(&self.nodes[b].bounds, p);
                // visit the nearer child first
                if da <= db {
                    stack.push(b);
                    stack.push(a);
                } else {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        best
    }

    /// Majority vote over four horizontal rays: a ray whose first hit is a back face votes
    /// "inside solid". The point is free when at most one ray votes inside.
    pub fn point_in_free_space(&self, p: &Vec3) -> bool {
        let dirs = [Vec3::x(), -Vec3::x(), Vec3::z(), -Vec3::z()];
        let inside = dirs
            .iter()
            .filter(|d| self.raycast(p, d).is_some_and(|h| self.normals[h.face].dot(d) > 0.0))
            .count();
        inside <= 1
    }

    /// Whether the open segment `a -> b` crosses the mesh.
    pub fn segment_blocked(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= RAY_EPS {
            return false;
        }
        self.raycast_within(a, &(d / len), len - RAY_EPS).is_some()
    }
}

fn tri_bounds(tris: &[[Vec3; 3]], idx: &[usize]) -> Aabb {
    Aabb::from_points(idx.iter().flat_map(|&i| tris[i].iter())).unwrap()
}

fn slab(b: &Aabb, o: &Vec3, inv: &Vec3) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        let (mut lo, mut hi) = ((b.min[k] - o[k]) * inv[k], (b.max[k] - o[k]) * inv[k]);
        if lo.is_nan() || hi.is_nan() {
            // origin on a slab plane with a zero direction component
            if o[k] < b.min[k] || o[k] > b.max[k] {
                return None;
            }
            continue;
        }
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        t0 = t0.max(lo);
        t1 = t1.min(hi);
    }
    // pad for rounding so grazing hits on box faces are not culled
    let pad = 1e-9 * (1.0 + t1.abs());
    (t1 + pad >= t0.max(0.0)).then_some(t0.max(0.0))
}

fn box_distance_sq(b: &Aabb, p: &Vec3) -> f64 {
    let mut s = 0.0;
    for k in 0..3 {
        let d = (b.min[k] - p[k]).max(0.0).max(p[k] - b.max[k]);
        s += d * d;
    }
    s
}

/// Closest point on a triangle (Voronoi-region walk).
pub fn closest_point_triangle(p: &Vec3, t: &[Vec3; 3]) -> Vec3 {
    let (a, b, c) = (t[0], t[1], t[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
