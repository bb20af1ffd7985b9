use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::compose::TsdfVolume;
use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};

/// Corner `c` of the unit cube sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner(c: usize) -> Vec3 {
    Vec3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64)
}

/// The 12 cube edges as corner pairs, lower corner first.
fn cube_edges() -> Vec<(usize, usize)> {
    let mut e = Vec::with_capacity(12);
    for a in 0..8 {
        for bit in [1, 2, 4] {
            if a & bit == 0 {
                e.push((a, a | bit));
            }
        }
    }
    e
}

/// Triangles (as cube-edge triples) per corner configuration, bit `c` set when corner `c` is
/// inside (negative distance). Face-ambiguous cases separate the inside corners. Triangles wind
/// counter-clockwise seen from the outside.
fn tables() -> &'static Vec<Vec<[usize; 3]>> {
    static T: OnceLock<Vec<Vec<[usize; 3]>>> = OnceLock::new();
    T.get_or_init(build_tables)
}

fn build_tables() -> Vec<Vec<[usize; 3]>> {
    let edges = cube_edges();
    let edge_of = |a: usize, b: usize| {
        let (a, b) = (a.min(b), a.max(b));
        edges.iter().position(|&e| e == (a, b)).expect("cube edge")
    };
    let mid = |e: usize| (corner(edges[e].0) + corner(edges[e].1)) * 0.5;
    // faces as corner cycles with their outward normals
    let mut faces: Vec<([usize; 4], Vec3)> = Vec::new();
    for axis in 0..3 {
        let bit = 1 << axis;
        let (o1, o2) = (1 << ((axis + 1) % 3), 1 << ((axis + 2) % 3));
        for side in 0..2 {
            let base = if side == 1 { bit } else { 0 };
            let mut n = Vec3::zeros();
            n[axis] = if side == 1 { 1.0 } else { -1.0 };
            faces.push(([base, base | o1, base | o1 | o2, base | o2], n));
        }
    }
    (0..256usize)
        .map(|cfg| {
            let inside = |c: usize| cfg >> c & 1 == 1;
            let mut next: HashMap<usize, usize> = HashMap::new();
            for (cyc, n) in &faces {
                let crossed: Vec<usize> = (0..4)
                    .filter(|&i| inside(cyc[i]) != inside(cyc[(i + 1) % 4]))
                    .map(|i| edge_of(cyc[i], cyc[(i + 1) % 4]))
                    .collect();
                let mut segments: Vec<(usize, usize, Vec3)> = Vec::new();
                match crossed.len() {
                    2 => {
                        let ins: Vec<Vec3> = cyc.iter().filter(|c| inside(**c)).map(|c| corner(*c)).collect();
                        let c = ins.iter().sum::<Vec3>() / ins.len() as f64;
                        segments.push((crossed[0], crossed[1], c));
                    }
                    4 => {
                        for (i, &c) in cyc.iter().enumerate().filter(|(_, c)| inside(**c)) {
                            let prev = cyc[(i + 3) % 4];
                            let nxt = cyc[(i + 1) % 4];
                            segments.push((edge_of(prev, c), edge_of(c, nxt), corner(c)));
                        }
                    }
                    _ => {}
                }
                for (a, b, inner) in segments {
                    let s = (mid(a) + mid(b)) * 0.5 - inner;
                    let d = s.cross(n);
                    if (mid(b) - mid(a)).dot(&d) >= 0.0 {
                        next.insert(a, b);
                    } else {
                        next.insert(b, a);
                    }
                }
            }
            let mut tris = Vec::new();
            let mut starts: Vec<usize> = next.keys().copied().collect();
            starts.sort_unstable();
            let mut used = [false; 12];
            for s in starts {
                if used[s] {
                    continue;
                }
                let mut lp = vec![s];
                used[s] = true;
                let mut cur = next[&s];
                while cur != s {
                    used[cur] = true;
                    lp.push(cur);
                    cur = next[&cur];
                }
                for i in 1..lp.len() - 1 {
                    tris.push([lp[0], lp[i], lp[i + 1]]);
                }
            }
            tris
        })
        .collect()
}

/// Marching cubes over the zero level set. Only cubes whose eight nodes are all observed
/// contribute. Vertices are shared along grid edges and carry interpolated colors.
pub fn marching_cubes(vol: &TsdfVolume) -> TriangleMesh {
    let table = tables();
    let edges = cube_edges();
    let [nx, ny, nz] = vol.dims;
    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut faces = Vec::new();
    let mut vertex_of: HashMap<(usize, usize), u32> = HashMap::new();
    if nx < 2 || ny < 2 || nz < 2 {
        return TriangleMesh::default();
    }
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let node = |c: usize| vol.index(i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1));
                let ids: [usize; 8] = std::array::from_fn(node);
                if ids.iter().any(|&n| vol.weight[n] <= 0.0) {
                    continue;
                }
                let cfg = (0..8).fold(0usize, |acc, c| acc | (usize::from(vol.sdf[ids[c]] < 0.0) << c));
                let tris = &table[cfg];
                if tris.is_empty() {
                    continue;
                }
                let mut local = [u32::MAX; 12];
                for tri in tris {
                    let f = tri.map(|e| {
                        if local[e] == u32::MAX {
                            let (a, b) = edges[e];
                            let (na, nb) = (ids[a], ids[b]);
                            let (sa, sb) = (vol.sdf[na], vol.sdf[nb]);
                            let t = if sa == sb {
                                0.5
                            } else {
                                (sa / (sa - sb)).clamp(0.0, 1.0)
                            };
                            // crossings exactly on a node are welded into one vertex
                            let key = match t {
                                0.0 => (na, 3),
                                1.0 => (nb, 3),
                                _ => (na, (b - a).trailing_zeros() as usize),
                            };
                            local[e] = *vertex_of.entry(key).or_insert_with(|| {
                                let pa = vol.position(i + (a & 1), j + (a >> 1 & 1), k + (a >> 2 & 1));
                                let pb = vol.position(i + (b & 1), j + (b >> 1 & 1), k + (b >> 2 & 1));
                                vertices.push(pa + (pb - pa) * t);
                                let (ca, cb) = (vol.color[na], vol.color[nb]);
                                colors.push(std::array::from_fn(|ch| ca[ch] + (cb[ch] - ca[ch]) * t));
                                (vertices.len() - 1) as u32
                            });
                        }
                        local[e]
                    });
                    if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
                        faces.push(f);
                    }
                }
            }
        }
    }
    TriangleMesh {
        vertices,
        faces,
        aspect: None,
        colors: Some(colors),
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Drops connected components (faces linked through shared vertices) with fewer than
/// `min_faces` faces.
pub fn remove_small_components(mesh: &TriangleMesh, min_faces: usize) -> TriangleMesh {
    let mut parent: Vec<usize> = (0..mesh.vertices.len()).collect();
    for f in &mesh.faces {
        for k in 1..3 {
            let (a, b) = (find(&mut parent, f[0] as usize), find(&mut parent, f[k] as usize));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut size: HashMap<usize, usize> = HashMap::new();
    let roots: Vec<usize> = mesh.faces.iter().map(|f| find(&mut parent, f[0] as usize)).collect();
    for r in &roots {
        *size.entry(*r).or_default() += 1;
    }
    let keep: Vec<bool> = roots.iter().map(|r| size[r] >= min_faces).collect();
    mesh.subset(&keep)
}

fn raw_normal(p: &[Vec3], f: &[u32; 3]) -> Vec3 {
    let [a, b, c] = f.map(|k| p[k as usize]);
    (b - a).cross(&(c - a))
}

/// Greedy shortest-edge collapse to the midpoint until at most `target_faces` remain. A
/// collapse is skipped when it would flip or degenerate a surviving face or when the edge's
/// endpoints share more neighbors than the faces on that edge.
pub fn simplify_mesh(mesh: &TriangleMesh, target_faces: usize) -> TriangleMesh {
    let mut pos = mesh.vertices.clone();
    let mut col = mesh.colors.clone();
    let mut faces = mesh.faces.clone();
    let mut face_alive = vec![true; faces.len()];
    let mut vert_faces: Vec<Vec<usize>> = vec![Vec::new(); pos.len()];
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            vert_faces[v as usize].push(fi);
        }
    }
    let mut alive = mesh.faces.len();
    let mut heap = BinaryHeap::new();
    let push_edge = |heap: &mut BinaryHeap<_>, pos: &[Vec3], a: u32, b: u32| {
        let (a, b) = (a.min(b), a.max(b));
        heap.push(Reverse(((pos[a as usize] - pos[b as usize]).norm().to_bits(), a, b)));
    };
    for f in &faces {
        for k in 0..3 {
            push_edge(&mut heap, &pos, f[k], f[(k + 1) % 3]);
        }
    }
    let neighbors = |vf: &[usize], faces: &[[u32; 3]], face_alive: &[bool], v: u32| {
        let mut n: Vec<u32> = vf
            .iter()
            .filter(|&&f| face_alive[f])
            .flat_map(|&f| faces[f])
            .filter(|&u| u != v)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    };
    let mut removed = vec![false; pos.len()];
    while alive > target_faces {
        let Some(Reverse((len_bits, a, b))) = heap.pop() else {
            break;
        };
        let (ua, ub) = (a as usize, b as usize);
        if removed[ua] || removed[ub] || (pos[ua] - pos[ub]).norm().to_bits() != len_bits {
            continue;
        }
        let shared: Vec<usize> = vert_faces[ua]
            .iter()
            .copied()
            .filter(|&f| face_alive[f] && faces[f].contains(&b))
            .collect();
        if shared.is_empty() {
            continue;
        }
        let na = neighbors(&vert_faces[ua], &faces, &face_alive, a);
        let nb = neighbors(&vert_faces[ub], &faces, &face_alive, b);
        let common = na.iter().filter(|v| nb.binary_search(v).is_ok()).count();
        if common != shared.len() {
            continue;
        }
        let m = (pos[ua] + pos[ub]) * 0.5;
        let ok = vert_faces[ua].iter().chain(&vert_faces[ub]).all(|&f| {
            if !face_alive[f] || shared.contains(&f) {
                return true;
            }
            let before = raw_normal(&pos, &faces[f]);
            let moved = faces[f].map(|v| if v == a || v == b { m } else { pos[v as usize] });
            let after = (moved[1] - moved[0]).cross(&(moved[2] - moved[0]));
            after.dot(&before) > 0.0 && after.norm() > 1e-12 * before.norm().max(1e-300)
        });
        if !ok {
            continue;
        }
        pos[ua] = m;
        if let Some(c) = col.as_mut() {
            c[ua] = std::array::from_fn(|ch| 0.5 * (c[ua][ch] + c[ub][ch]));
        }
        for f in shared {
            face_alive[f] = false;
            alive -= 1;
        }
        let moved: Vec<usize> = vert_faces[ub].clone();
        for f in moved {
            if face_alive[f] {
                for v in faces[f].iter_mut() {
                    if *v == b {
                        *v = a;
                    }
                }
                vert_faces[ua].push(f);
            }
        }
        vert_faces[ub].clear();
        removed[ub] = true;
        vert_faces[ua].retain(|&f| face_alive[f]);
        vert_faces[ua].sort_unstable();
        vert_faces[ua].dedup();
        for v in neighbors(&vert_faces[ua], &faces, &face_alive, a) {
            push_edge(&mut heap, &pos, a, v);
        }
    }
    let out = TriangleMesh {
        vertices: pos,
        faces,
        aspect: None,
        colors: col,
    };
    out.subset(&face_alive)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshExtraction {
    pub min_component_faces: usize,
    /// Face budget for edge-collapse simplification; `None` keeps the full mesh.
    pub target_faces: Option<usize>,
}

impl Default for MeshExtraction {
    fn default() -> Self {
        MeshExtraction {
            min_component_faces: 10,
            target_faces: None,
        }
    }
}

/// Marching cubes, small-component removal and optional simplification. An observed volume
/// without a zero crossing yields an empty mesh.
pub fn extract_mesh(vol: &TsdfVolume, opts: &MeshExtraction) -> Result<TriangleMesh> {
    if vol.observed_count() == 0 {
        return Err(Error::invalid("TSDF volume has no observed voxels"));
    }
    let mut mesh = remove_small_components(&marching_cubes(vol), opts.min_component_faces);
    if let Some(t) = opts.target_faces {
        if mesh.face_count() > t {
            mesh = simplify_mesh(&mesh, t);
        }
    }
    mesh.check_invariants()?;
    Ok(mesh)
}
