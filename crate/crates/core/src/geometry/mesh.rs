use crate::error::{Error, Result};
use crate::geometry::{erp, DepthMap, Vec3};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Aabb> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Aabb {
            min: *first,
            max: *first,
        };
        for p in it {
            b.grow(p);
        }
        Some(b)
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Box grown by `fraction` of its extent on every side.
    pub fn inflated(&self, fraction: f64) -> Aabb {
        let pad = self.extent() * fraction;
        Aabb {
            min: self.min - pad,
            max: self.max + pad,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

/// Triangle mesh with optional per-face aspect ratios and vertex colors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// Per-face stretch ratio; faces above a threshold are flagged as stretched.
    pub aspect: Option<Vec<f64>>,
    pub colors: Option<Vec<[f64; 3]>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let m = TriangleMesh {
            vertices,
            faces,
            aspect: None,
            colors: None,
        };
        m.check_invariants()?;
        Ok(m)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let nv = self.vertices.len() as u32;
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&k| k >= nv) {
                return Err(Error::Invariant(format!("face {i} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Invariant(format!("face {i} repeats a vertex index")));
            }
        }
        if self.aspect.as_ref().is_some_and(|a| a.len() != self.faces.len()) {
            return Err(Error::Invariant("aspect array must match the face count".into()));
        }
        if self.colors.as_ref().is_some_and(|c| c.len() != self.vertices.len()) {
            return Err(Error::Invariant("color array must match the vertex count".into()));
        }
        Ok(())
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    #[inline]
    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal `(b - a) x (c - a)`; winding points it toward free space.
    #[inline]
    pub fn face_normal_raw(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let n = self.face_normal_raw(f);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            n
        }
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (a + b + c) / 3.0
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    /// Indices of faces whose aspect ratio exceeds `threshold`.
    pub fn stretched_faces(&self, threshold: f64) -> Vec<usize> {
        match &self.aspect {
            Some(a) => (0..a.len()).filter(|&f| a[f] > threshold).collect(),
            None => Vec::new(),
        }
    }

    /// Appends another mesh, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(other.faces.iter().map(|f| f.map(|k| k + off)));
        self.aspect = match (self.aspect.take(), &other.aspect) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            _ => None,
        };
        self.colors = match (self.colors.take(), &other.colors) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            _ => None,
        };
    }

    /// Mesh with only the selected faces; unused vertices are dropped.
    pub fn subset(&self, keep: &[bool]) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut out = TriangleMesh {
            vertices: Vec::new(),
            faces: Vec::new(),
            aspect: self.aspect.as_ref().map(|_| Vec::new()),
            colors: self.colors.as_ref().map(|_| Vec::new()),
        };
        for (f, face) in self.faces.iter().enumerate() {
            if !keep[f] {
                continue;
            }
            let mapped = face.map(|k| {
                let k = k as usize;
                if remap[k] == u32::MAX {
                    remap[k] = out.vertices.len() as u32;
                    out.vertices.push(self.vertices[k]);
                    if let (Some(dst), Some(src)) = (out.colors.as_mut(), self.colors.as_ref()) {
                        dst.push(src[k]);
                    }
                }
                remap[k]
            });
            out.faces.push(mapped);
            if let (Some(dst), Some(src)) = (out.aspect.as_mut(), self.aspect.as_ref()) {
                dst.push(src[f]);
            }
        }
        out
    }
}

/// Default stretch threshold above which a panoramic face counts as degenerate.
pub const DEFAULT_ASPECT_THRESHOLD: f64 = 10.0;

/// Triangulates an ERP radial-distance map on a `rows x cols` spherical grid around `center`.
///
/// Vertex `(r, c)` sits at latitude/longitude of grid-cell centers, pushed out to the depth
/// sampled there (nearest pixel). Each cell yields two triangles, wrapping in azimuth. Faces
/// touching an invalid depth sample are dropped. Winding makes face normals point toward the
/// center (the observed free space).
///
/// Each face records a stretch ratio: its longest over shortest edge, where every edge length
/// is first divided by the length that edge would have on a constant-depth sphere. A face on a
/// smooth surface scores near 1 at any latitude; a face spanning a depth discontinuity scores
/// roughly the depth jump over the angular spacing.
pub fn build_panoramic_mesh(pano_depth: &DepthMap, rows: u32, cols: u32, center: &Vec3) -> Result<TriangleMesh> {
    if rows < 2 || cols < 3 {
        return Err(Error::invalid(format!(
            "panoramic mesh needs rows >= 2 and cols >= 3, got {rows}x{cols}"
        )));
    }
    if pano_depth.width != 2 * pano_depth.height {
        return Err(Error::invalid(format!(
            "ERP depth must be 2:1, got {}x{}",
            pano_depth.width, pano_depth.height
        )));
    }
    if pano_depth.valid_count() == 0 {
        return Err(Error::invalid("ERP depth has no valid pixels"));
    }
    let (w, h) = (pano_depth.width, pano_depth.height);
    let mut dirs = Vec::with_capacity((rows * cols) as usize);
    let mut depth = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            // grid-cell centers in ERP pixel coordinates
            let u = (c as f64 + 0.5) / cols as f64 * w as f64;
            let v = (r as f64 + 0.5) / rows as f64 * h as f64;
            dirs.push(erp::pixel_direction(u, v, w, h));
            let pu = (u.floor() as u32).min(w - 1);
            let pv = (v.floor() as u32).min(h - 1);
            depth.push(pano_depth.get(pu, pv));
        }
    }
    let idx = |r: u32, c: u32| r * cols + (c % cols);
    let mut vertices = Vec::with_capacity(dirs.len());
    let mut remap = vec![u32::MAX; dirs.len()];
    for (i, (d, z)) in dirs.iter().zip(&depth).enumerate() {
        if let Some(z) = z {
            remap[i] = vertices.len() as u32;
            vertices.push(center + d * *z);
        }
    }
    let mut faces = Vec::new();
    let mut aspect = Vec::new();
    for r in 0..rows - 1 {
        for c in 0..cols {
            let a = idx(r, c);
            let b = idx(r, c + 1);
            let cc = idx(r + 1, c);
            let d = idx(r + 1, c + 1);
            for tri in [[a, b, cc], [b, d, cc]] {
                if tri.iter().any(|&k| remap[k as usize] == u32::MAX) {
                    continue;
                }
                aspect.push(stretch_ratio(
                    &tri.map(|k| (dirs[k as usize], depth[k as usize].unwrap())),
                ));
                faces.push(tri.map(|k| remap[k as usize]));
            }
        }
    }
    let mut mesh = TriangleMesh {
        vertices,
        faces,
        aspect: Some(aspect),
        colors: None,
    };
    orient_toward(&mut mesh, center);
    Ok(mesh)
}

fn stretch_ratio(corners: &[(Vec3, f64); 3]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in 0..3 {
        let (da, za) = corners[k];
        let (db, zb) = corners[(k + 1) % 3];
        let actual = (da * za - db * zb).norm();
        let reference = (da - db).norm() * 0.5 * (za + zb);
        let s = if reference > 0.0 {
            actual / reference
        } else {
            f64::INFINITY
        };
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Flips faces whose normal points away from `center`.
fn orient_toward(mesh: &mut TriangleMesh, center: &Vec3) {
    for f in 0..mesh.faces.len() {
        let n = mesh.face_normal_raw(f);
        let to_center = center - mesh.face_centroid(f);
        if n.dot(&to_center) < 0.0 {
            mesh.faces[f].swap(1, 2);
        }
    }
}

/// Closed axis-aligned box with the given winding: `inward` makes normals face the interior.
pub fn box_mesh(min: Vec3, max: Vec3, inward: bool) -> TriangleMesh {
    let v = |x: bool, y: bool, z: bool| {
        Vec3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8u32 {
        vertices.push(v(i & 1 != 0, i & 2 != 0, i & 4 != 0));
    }
    // outward-wound quads
    let quads: [[u32; 4]; 6] = [
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
    ];
    let mut faces = Vec::with_capacity(12);
    for q in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    let mut mesh = TriangleMesh {
        vertices,
        faces,
        aspect: None,
        colors: None,
    };
    let c = (min + max) * 0.5;
    for f in 0..mesh.faces.len() {
        let n = mesh.face_normal_raw(f);
        let outward = n.dot(&(mesh.face_centroid(f) - c)) > 0.0;
        if outward == inward {
            mesh.faces[f].swap(1, 2);
        }
    }
    mesh
}

/// Two-triangle rectangle spanned by `origin + s*edge_a + t*edge_b`, normal along `edge_a x edge_b`.
pub fn quad_mesh(origin: Vec3, edge_a: Vec3, edge_b: Vec3) -> TriangleMesh {
    TriangleMesh {
        vertices: vec![origin, origin + edge_a, origin + edge_a + edge_b, origin + edge_b],
        faces: vec![[0, 1, 2], [0, 2, 3]],
        aspect: None,
        colors: None,
    }
}
