//! Analytic test scenes built from axis-aligned boxes.
//!
//! Every scene is a room (optionally without a ceiling) plus solid boxes, viewed from a
//! panorama center at the world origin with the floor 1.4 m below it. Depth is rendered in
//! closed form from ray/box intersections.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::erp::pixel_direction;
use crate::geometry::{box_mesh, Camera, DepthMap, NormalMap, PanoramaImage, RgbImage, TriangleMesh, Vec3};
use crate::planner::Landmark;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    BoxRoom,
    Corridor,
    PillarFloor,
    StepDepth,
}

impl SceneKind {
    pub const ALL: [SceneKind; 4] = [
        SceneKind::BoxRoom,
        SceneKind::Corridor,
        SceneKind::PillarFloor,
        SceneKind::StepDepth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::BoxRoom => "box_room",
            SceneKind::Corridor => "corridor",
            SceneKind::PillarFloor => "pillar_floor",
            SceneKind::StepDepth => "step_depth",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown scene kind '{s}' (expected box_room, corridor, pillar_floor or step_depth)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolidBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl SolidBox {
    fn lo(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    fn hi(&self) -> Vec3 {
        Vec3::from(self.max)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] > self.min[k] && p[k] < self.max[k])
    }
}

/// Closed-form description of a synthetic scene, written next to the rendered inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub kind: SceneKind,
    pub origin: [f64; 3],
    /// Interior of the room.
    pub room: SolidBox,
    /// The room has no ceiling; rays leaving through the top see sky.
    pub open_top: bool,
    pub solids: Vec<SolidBox>,
    pub landmarks: Vec<Landmark>,
}

/// Floor plane sits this far below the panorama center.
pub const CAMERA_HEIGHT: f64 = 1.4;

impl SceneTruth {
    pub fn new(kind: SceneKind) -> SceneTruth {
        let h = CAMERA_HEIGHT;
        let (room, open_top, solids, landmarks) = match kind {
            SceneKind::BoxRoom => (
                SolidBox {
                    min: [-3.0, h - 3.0, -2.0],
                    max: [3.0, h, 2.0],
                },
                false,
                Vec::new(),
                Vec::new(),
            ),
            SceneKind::Corridor => (
                SolidBox {
                    min: [-6.0, h - 2.8, -1.0],
                    max: [6.0, h, 1.0],
                },
                false,
                Vec::new(),
                Vec::new(),
            ),
            SceneKind::PillarFloor => {
                let top = h - 2.5;
                let pillar = SolidBox {
                    min: [2.1, top, 1.1],
                    max: [2.9, h, 1.9],
                };
                let half = (pillar.hi() - pillar.lo()) * 0.5;
                let c = (pillar.hi() + pillar.lo()) * 0.5;
                (
                    SolidBox {
                        min: [-8.0, top, -8.0],
                        max: [8.0, h, 8.0],
                    },
                    true,
                    vec![pillar],
                    vec![Landmark {
                        id: 1,
                        label: "pillar".into(),
                        centroid: [c.x, c.y, c.z],
                        radius: half.norm(),
                    }],
                )
            }
            SceneKind::StepDepth => (
                SolidBox {
                    min: [-4.0, h - 3.0, -3.0],
                    max: [4.0, h, 10.0],
                },
                false,
                // floor-to-ceiling partition covering the right half of the forward view
                vec![SolidBox {
                    min: [0.0, h - 3.0, 2.0],
                    max: [4.0, h, 2.2],
                }],
                Vec::new(),
            ),
        };
        SceneTruth {
            kind,
            origin: [0.0, 0.0, 0.0],
            room,
            open_top,
            solids,
            landmarks,
        }
    }

    pub fn origin(&self) -> Vec3 {
        Vec3::from(self.origin)
    }

    /// Triangulated surfaces with normals facing free space.
    pub fn mesh(&self) -> TriangleMesh {
        let mut m = box_mesh(self.room.lo(), self.room.hi(), true);
        if self.open_top {
            let top = self.room.min[1];
            let keep: Vec<bool> = (0..m.face_count())
                .map(|f| !m.triangle(f).iter().all(|v| (v.y - top).abs() < 1e-12))
                .collect();
            m = m.subset(&keep);
        }
        for s in &self.solids {
            m.append(&box_mesh(s.lo(), s.hi(), false));
        }
        m
    }

    /// The point lies inside a solid or outside the room walls.
    pub fn inside_geometry(&self, p: &Vec3) -> bool {
        let r = &self.room;
        let outside = (0..3).any(|k| {
            let below_top = k == 1 && self.open_top && p[1] <= r.min[1];
            !below_top && (p[k] <= r.min[k] || p[k] >= r.max[k])
        });
        outside || self.solids.iter().any(|s| s.contains(p))
    }

    /// First surface along a unit ray: distance and surface id. Room faces are ids 0..6 in the
    /// order -x, +x, -y, +y, -z, +z; solid `k` uses `6 + k`.
    pub fn ray_hit(&self, o: &Vec3, d: &Vec3) -> Option<(f64, usize, Vec3)> {
        let mut best: Option<(f64, usize, Vec3)> = None;
        // exit through the room interior
        let mut t_exit = f64::INFINITY;
        let mut axis_exit = (0, false);
        for k in 0..3 {
            if d[k].abs() < 1e-15 {
                continue;
            }
            let (t, positive) = if d[k] > 0.0 {
                ((self.room.max[k] - o[k]) / d[k], true)
            } else {
                ((self.room.min[k] - o[k]) / d[k], false)
            };
            if t < t_exit {
                t_exit = t;
                axis_exit = (k, positive);
            }
        }
        let (k, positive) = axis_exit;
        let sky = self.open_top && k == 1 && !positive;
        if t_exit.is_finite() && t_exit > 0.0 && !sky {
            let mut n = Vec3::zeros();
            n[k] = if positive { -1.0 } else { 1.0 };
            best = Some((t_exit, 2 * k + positive as usize, n));
        }
        for (i, s) in self.solids.iter().enumerate() {
            if let Some((t, n)) = slab_entry(o, d, &s.lo(), &s.hi()) {
                if best.is_none_or(|b| t < b.0) {
                    best = Some((t, 6 + i, n));
                }
            }
        }
        best
    }

    pub fn ray_distance(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        self.ray_hit(o, d).map(|h| h.0)
    }
}

/// Entry distance and outward normal of a ray starting outside a box.
fn slab_entry(o: &Vec3, d: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<(f64, Vec3)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    let mut axis = 0;
    let mut sign = 1.0;
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let a = (lo[k] - o[k]) / d[k];
        let b = (hi[k] - o[k]) / d[k];
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        if near > t0 {
            t0 = near;
            axis = k;
            sign = if d[k] > 0.0 { -1.0 } else { 1.0 };
        }
        t1 = t1.min(far);
    }
    if t0 > t1 || t0 <= 0.0 {
        return None;
    }
    let mut n = Vec3::zeros();
    n[axis] = sign;
    Some((t0, n))
}

/// Rendered inputs of a synthetic scene.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub truth: SceneTruth,
    pub panorama: PanoramaImage,
    pub depth: DepthMap,
    pub sky: Vec<bool>,
}

const SKY: [f64; 3] = [0.55, 0.7, 0.95];

fn palette(surfaces: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..surfaces)
        .map(|_| {
            [
                rng.random_range(0.25..0.9),
                rng.random_range(0.25..0.9),
                rng.random_range(0.25..0.9),
            ]
        })
        .collect()
}

fn shade(base: &[f64; 3], p: &Vec3, n: &Vec3, d: &Vec3) -> [f64; 3] {
    let parity = ((p.x / 0.5).floor() + (p.y / 0.5).floor() + (p.z / 0.5).floor()).rem_euclid(2.0);
    let k = (0.6 + 0.4 * parity) * (0.7 + 0.3 * n.dot(d).abs());
    base.map(|c| (c * k).clamp(0.0, 1.0))
}

impl SynthScene {
    /// Renders the panorama, radial depth and sky mask at `width x width/2`.
    pub fn render(kind: SceneKind, width: u32, seed: u64) -> Result<SynthScene> {
        if width < 8 || !width.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "ERP width must be even and at least 8, got {width}"
            )));
        }
        let height = width / 2;
        let truth = SceneTruth::new(kind);
        let colors = palette(6 + truth.solids.len(), seed);
        let o = truth.origin();
        let rows: Vec<Vec<(Option<f64>, [f64; 3])>> = (0..height)
            .into_par_iter()
            .map(|v| {
                (0..width)
                    .map(|u| {
                        let d = pixel_direction(u as f64 + 0.5, v as f64 + 0.5, width, height);
                        match truth.ray_hit(&o, &d) {
                            Some((t, id, n)) => (Some(t), shade(&colors[id], &(o + d * t), &n, &d)),
                            None => (None, SKY),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut depth = DepthMap::empty(width, height);
        let mut img = RgbImage::new(width, height);
        let mut sky = vec![false; (width * height) as usize];
        for (v, row) in rows.iter().enumerate() {
            for (u, (t, c)) in row.iter().enumerate() {
                let i = v * width as usize + u;
                match t {
                    Some(t) => depth.set(u as u32, v as u32, *t),
                    None => sky[i] = true,
                }
                img.pixels[i] = *c;
            }
        }
        Ok(SynthScene {
            truth,
            panorama: PanoramaImage::new(img)?,
            depth,
            sky,
        })
    }
}

/// Perspective rendering of the analytic scene: z-depth, color, camera-frame normals, sky.
#[derive(Debug, Clone)]
pub struct SynthView {
    pub depth: DepthMap,
    pub color: RgbImage,
    pub normals: NormalMap,
    pub sky: Vec<bool>,
}

/// Camera-frame z-depth and normal of a hit, with its shaded color.
type ViewSample = (Option<(f64, Vec3)>, [f64; 3]);

pub fn render_view(truth: &SceneTruth, cam: &Camera, seed: u64) -> SynthView {
    let colors = palette(6 + truth.solids.len(), seed);
    let (w, h) = (cam.width, cam.height);
    let o = cam.translation;
    let rt = cam.rotation.transpose();
    let samples: Vec<ViewSample> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (u, v) = (i % w, i / w);
            let d = cam.ray_direction(u as f64 + 0.5, v as f64 + 0.5);
            match truth.ray_hit(&o, &d) {
                Some((t, id, n)) => {
                    let z = (rt * (d * t)).z;
                    (Some((z, rt * n)), shade(&colors[id], &(o + d * t), &n, &d))
                }
                None => (None, SKY),
            }
        })
        .collect();
    let mut depth = DepthMap::empty(w, h);
    let mut normals = NormalMap::empty(w, h);
    let mut color = RgbImage::new(w, h);
    let mut sky = vec![false; (w * h) as usize];
    for (i, (hit, c)) in samples.into_iter().enumerate() {
        let (u, v) = (i as u32 % w, i as u32 / w);
        match hit {
            Some((z, n)) => {
                depth.set(u, v, z);
                normals.set_index(i, n);
            }
            None => sky[i] = true,
        }
        color.pixels[i] = c;
    }
    SynthView {
        depth,
        color,
        normals,
        sky,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::raycast;

    #[test]
    fn closed_form_depth_matches_mesh_raycast() {
        for kind in SceneKind::ALL {
            let truth = SceneTruth::new(kind);
            let mesh = truth.mesh();
            let o = truth.origin();
            for k in 0..200 {
                let a = k as f64 * 0.731;
                let b = (k as f64 * 0.377).sin() * 1.5;
                let d = Vec3::new(b.cos() * a.sin(), -b.sin(), b.cos() * a.cos());
                let analytic = truth.ray_distance(&o, &d);
                let traced = raycast(&mesh, &o, &d).map(|h| h.t);
                match (analytic, traced) {
                    (Some(x), Some(y)) => assert!((x - y).abs() < 1e-6, "{kind}: {x} vs {y}"),
                    (None, None) => {}
                    other => panic!("{kind}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn inside_geometry_classifies_points() {
        let t = SceneTruth::new(SceneKind::PillarFloor);
        assert!(!t.inside_geometry(&Vec3::zeros()));
        assert!(t.inside_geometry(&Vec3::new(2.5, 0.0, 1.5)));
        assert!(t.inside_geometry(&Vec3::new(0.0, 2.0, 0.0)));
        assert!(!t.inside_geometry(&Vec3::new(0.0, -5.0, 0.0)));
        assert!(t.inside_geometry(&Vec3::new(9.0, 0.0, 0.0)));
        assert_eq!(t.landmarks.len(), 1);
        assert_eq!("corridor".parse::<SceneKind>().unwrap(), SceneKind::Corridor);
        assert!("cave".parse::<SceneKind>().is_err());
    }

    #[test]
    fn open_top_leaves_sky() {
        let s = SynthScene::render(SceneKind::PillarFloor, 64, 0).unwrap();
        assert!(s.sky[0] && !s.sky[s.sky.len() - 1]);
        assert_eq!(s.depth.valid_count(), s.sky.iter().filter(|x| !**x).count());
        let b = SynthScene::render(SceneKind::BoxRoom, 64, 0).unwrap();
        assert!(b.sky.iter().all(|x| !*x));
    }
}
