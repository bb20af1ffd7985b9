//! Camera trajectory planning over a parsed panoramic scene.
//!
//! Five families are produced: orbits around the panorama's own views (regular), arcs
//! around landmarks (surrounding), orbits around under-observed geometry (recon-aware),
//! exploration toward the farthest reachable cells (wandering) and pitched-up copies of
//! surrounding and wandering paths (aerial). Every trajectory starts at the panorama center
//! and is truncated at its first frame that would clip the scene mesh.

mod aerial;
mod recon;
mod regular;
mod surrounding;
mod wandering;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{elevation, look_at_rotation, Camera, DepthMap, Mat3, MeshIndex, TriangleMesh, Vec3, UP};
use crate::navmesh::{dijkstra_field, DistanceField, NavMesh};

pub use aerial::plan_aerial;
pub use recon::{detect_recon_targets, plan_recon_aware, ReconNode};
pub use regular::{plan_regular, view_median_depth};
pub use surrounding::{plan_surrounding, prune_tails, SurroundingCandidates};
pub use wandering::plan_wandering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Regular,
    Surrounding,
    ReconAware,
    Wandering,
    Aerial,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Regular,
        Mode::Surrounding,
        Mode::ReconAware,
        Mode::Wandering,
        Mode::Aerial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Regular => "regular",
            Mode::Surrounding => "surrounding",
            Mode::ReconAware => "recon_aware",
            Mode::Wandering => "wandering",
            Mode::Aerial => "aerial",
        }
    }

    /// Cameras of these modes travel over the navigation mesh.
    pub fn navigable(self) -> bool {
        matches!(self, Mode::Surrounding | Mode::ReconAware | Mode::Wandering)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A semantic object localized in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u32,
    #[serde(default)]
    pub label: String,
    pub centroid: [f64; 3],
    pub radius: f64,
}

impl Landmark {
    pub fn position(&self) -> Vec3 {
        Vec3::from(self.centroid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) || !self.centroid.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid(format!(
                "landmark {} needs a finite centroid and positive radius",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub camera: Camera,
    pub lookat: Vec3,
}

impl Frame {
    pub fn center(&self) -> Vec3 {
        self.camera.translation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: Mode,
    pub frames: Vec<Frame>,
    pub landmark_id: Option<u32>,
    pub iterative: bool,
}

impl Trajectory {
    pub fn centers(&self) -> Vec<Vec3> {
        self.frames.iter().map(Frame::center).collect()
    }

    /// Largest distance of any frame from the first one.
    pub fn max_displacement(&self) -> f64 {
        let Some(first) = self.frames.first() else { return 0.0 };
        let o = first.center();
        self.frames.iter().map(|f| (f.center() - o).norm()).fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    rotation: [f64; 9],
    translation: [f64; 3],
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    lookat: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct TrajectoryJson {
    mode: Mode,
    landmark_id: Option<u32>,
    iterative: bool,
    frames: Vec<FrameJson>,
}

impl From<&Trajectory> for TrajectoryJson {
    fn from(t: &Trajectory) -> Self {
        TrajectoryJson {
            mode: t.mode,
            landmark_id: t.landmark_id,
            iterative: t.iterative,
            frames: t
                .frames
                .iter()
                .map(|f| {
                    let c = crate::geometry::CameraJson::from(&f.camera);
                    FrameJson {
                        rotation: c.rotation,
                        translation: c.translation,
                        fx: c.fx,
                        fy: c.fy,
                        cx: c.cx,
                        cy: c.cy,
                        width: c.width,
                        height: c.height,
                        lookat: [f.lookat.x, f.lookat.y, f.lookat.z],
                    }
                })
                .collect(),
        }
    }
}

impl TryFrom<TrajectoryJson> for Trajectory {
    type Error = Error;

    fn try_from(j: TrajectoryJson) -> Result<Self> {
        let frames = j
            .frames
            .into_iter()
            .map(|f| {
                let camera = Camera::try_from(crate::geometry::CameraJson {
                    fx: f.fx,
                    fy: f.fy,
                    cx: f.cx,
                    cy: f.cy,
                    width: f.width,
                    height: f.height,
                    rotation: f.rotation,
                    translation: f.translation,
                })?;
                Ok(Frame {
                    camera,
                    lookat: Vec3::from(f.lookat),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            mode: j.mode,
            frames,
            landmark_id: j.landmark_id,
            iterative: j.iterative,
        })
    }
}

/// Planner output in generation order, regular first and aerial last.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

#[derive(Serialize, Deserialize)]
struct TrajectorySetJson {
    counts: std::collections::BTreeMap<String, usize>,
    trajectories: Vec<TrajectoryJson>,
}

impl TrajectorySet {
    pub fn count(&self, mode: Mode) -> usize {
        self.trajectories.iter().filter(|t| t.mode == mode).count()
    }

    pub fn counts(&self) -> [usize; 5] {
        Mode::ALL.map(|m| self.count(m))
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn of_mode(&self, mode: Mode) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(move |t| t.mode == mode)
    }

    pub fn to_json(&self) -> Result<String> {
        let j = TrajectorySetJson {
            counts: Mode::ALL
                .iter()
                .map(|m| (m.name().to_string(), self.count(*m)))
                .collect(),
            trajectories: self.trajectories.iter().map(TrajectoryJson::from).collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<TrajectorySet> {
        let j: TrajectorySetJson = serde_json::from_str(s)?;
        Ok(TrajectorySet {
            trajectories: j
                .trajectories
                .into_iter()
                .map(Trajectory::try_from)
                .collect::<Result<_>>()?,
        })
    }

    /// One line per frame: the 12 entries of the row-major 3x4 world-to-camera matrix.
    pub fn to_camera_list(&self) -> String {
        let mut s = String::new();
        for t in &self.trajectories {
            for f in &t.frames {
                let m = f.camera.world_to_camera_3x4();
                let vals: Vec<String> = m.iter().flatten().map(|v| format!("{v:.9}")).collect();
                s.push_str(&vals.join(" "));
                s.push('\n');
            }
        }
        s
    }
}

/// Per-mode trajectory limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    pub regular: usize,
    pub surrounding: usize,
    pub recon_aware: usize,
    pub wandering: usize,
    pub aerial: usize,
    pub total: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            regular: 9,
            surrounding: 5,
            recon_aware: 10,
            wandering: 3,
            aerial: 8,
            total: 35,
        }
    }
}

impl Caps {
    pub fn get(&self, m: Mode) -> usize {
        match m {
            Mode::Regular => self.regular,
            Mode::Surrounding => self.surrounding,
            Mode::ReconAware => self.recon_aware,
            Mode::Wandering => self.wandering,
            Mode::Aerial => self.aerial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub frame_width: u32,
    pub frame_height: u32,
    /// Horizontal field of view of emitted cameras, degrees.
    pub frame_fov_deg: f64,
    /// Longest allowed step between consecutive camera centers, meters.
    pub max_step: f64,
    /// Minimum distance from camera centers and segments to the mesh, meters.
    pub clearance_min: f64,
    /// Trajectories whose frames stay within this distance of the start are dropped.
    pub min_move: f64,
    /// Camera height above the navigation mesh when the origin gives none.
    pub camera_height: f64,
    /// Arc sampling step for orbits, degrees.
    pub orbit_step_deg: f64,

    pub regular_view_fov_deg: f64,
    pub regular_view_size: u32,
    pub regular_pitch_deg: f64,
    pub regular_azimuth_deg: f64,
    /// Extra azimuth sweep appended to each pitched orbit, degrees.
    pub regular_extra_azimuth_deg: f64,
    pub regular_extra_azimuth: bool,

    pub surround_candidates: usize,
    pub surround_r_min: f64,
    pub surround_k_fov: f64,
    pub tail_prune_deg: f64,

    pub recon_ratio_threshold: f64,
    pub recon_cluster_voxel: f64,
    pub recon_nms_radius: f64,
    pub recon_association_radius: f64,
    pub recon_ring_candidates: usize,
    pub recon_ring_radius: f64,
    pub recon_orbit_span_deg: f64,
    /// Angular tolerance below which candidates count as tied, degrees.
    pub recon_tie_deg: f64,
    /// Every k-th navigation cell is probed for the visible-range tie break.
    pub recon_visible_stride: usize,
    /// A line of sight may stop this short of the node and still count as visible, meters.
    pub recon_visibility_tol: f64,

    pub wander_sectors: usize,
    /// Frames ahead used as the gaze target along a wandering path.
    pub wander_lookahead: usize,

    pub aerial_pitch_deg: f64,
    pub aerial_step_deg: f64,
    pub aerial_near_limit: f64,

    pub caps: Caps,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            frame_width: 640,
            frame_height: 480,
            frame_fov_deg: 90.0,
            max_step: 1.0,
            clearance_min: 0.15,
            min_move: 0.5,
            camera_height: 1.4,
            orbit_step_deg: 5.0,
            regular_view_fov_deg: 120.0,
            regular_view_size: 256,
            regular_pitch_deg: 45.0,
            regular_azimuth_deg: 120.0,
            regular_extra_azimuth_deg: 60.0,
            regular_extra_azimuth: true,
            surround_candidates: 72,
            surround_r_min: 1.0,
            surround_k_fov: 1.5,
            tail_prune_deg: 45.0,
            recon_ratio_threshold: 10.0,
            recon_cluster_voxel: 0.5,
            recon_nms_radius: 1.0,
            recon_association_radius: 2.0,
            recon_ring_candidates: 36,
            recon_ring_radius: 1.5,
            recon_orbit_span_deg: 90.0,
            recon_tie_deg: 1.0,
            recon_visible_stride: 4,
            recon_visibility_tol: 0.3,
            wander_sectors: 8,
            wander_lookahead: 5,
            aerial_pitch_deg: 45.0,
            aerial_step_deg: 5.0,
            aerial_near_limit: 1.0,
            caps: Caps::default(),
        }
    }
}

/// Scene data consumed by the planners.
#[derive(Debug, Clone)]
pub struct PlanScene {
    /// Collision geometry, normally the panoramic mesh with per-face stretch ratios.
    pub mesh: TriangleMesh,
    pub navmesh: NavMesh,
    pub landmarks: Vec<Landmark>,
    /// ERP radial distances around `origin`.
    pub pano_depth: DepthMap,
    /// Panorama center.
    pub origin: Vec3,
}

/// Shared planning state: mesh index, start cell and its distance field.
pub struct PlanContext<'a> {
    pub scene: &'a PlanScene,
    pub config: &'a PlannerConfig,
    pub index: MeshIndex,
    pub start_cell: Option<usize>,
    pub field: Option<DistanceField>,
    /// Camera height above the navigation mesh.
    pub camera_height: f64,
    pub seed: u64,
    columns: HashMap<(i32, i32), Vec<usize>>,
}

impl<'a> PlanContext<'a> {
    pub fn new(scene: &'a PlanScene, config: &'a PlannerConfig, seed: u64) -> Result<PlanContext<'a>> {
        for l in &scene.landmarks {
            l.validate()?;
        }
        let index = MeshIndex::new(&scene.mesh);
        let nav = &scene.navmesh;
        let start_cell = nav.nearest_cell(&scene.origin);
        let field = start_cell.map(|s| dijkstra_field(nav, s)).transpose()?;
        let camera_height = start_cell
            .map(|s| elevation(&scene.origin) - elevation(&nav.position(s)))
            .filter(|h| *h > 0.0)
            .unwrap_or(config.camera_height);
        Ok(PlanContext {
            scene,
            config,
            index,
            start_cell,
            field,
            camera_height,
            seed,
            columns: nav.column_map(),
        })
    }

    pub fn nav(&self) -> &NavMesh {
        &self.scene.navmesh
    }

    pub fn origin(&self) -> Vec3 {
        self.scene.origin
    }

    /// Camera position above cell `c`.
    pub fn lifted(&self, c: usize) -> Vec3 {
        self.nav().position(c) + UP * self.camera_height
    }

    /// Reachable cell nearest to `p` horizontally within one cell size and not above `p`.
    pub fn support_cell(&self, p: &Vec3) -> Option<usize> {
        let nav = self.nav();
        let field = self.field.as_ref()?;
        let (gi, gj) = nav.grid_index(p);
        let mut best: Option<(f64, usize)> = None;
        for dj in -1..=1 {
            for di in -1..=1 {
                let Some(col) = self.columns.get(&(gi + di, gj + dj)) else {
                    continue;
                };
                for &c in col {
                    let q = nav.position(c);
                    let h = (q.x - p.x).hypot(q.z - p.z);
                    if h > nav.cell_size + 1e-9 || elevation(&q) > elevation(p) + 1e-9 || !field.reachable(c) {
                        continue;
                    }
                    if best.is_none_or(|(bh, bc)| h < bh || (h == bh && c < bc)) {
                        best = Some((h, c));
                    }
                }
            }
        }
        best.map(|(_, c)| c)
    }

    /// Camera center far enough from the mesh and outside solid regions.
    pub fn center_ok(&self, p: &Vec3) -> bool {
        self.index.distance(p) >= self.config.clearance_min && self.index.point_in_free_space(p)
    }

    /// No surface within the segment extended by the clearance margin.
    pub fn segment_ok(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 1e-12 {
            return true;
        }
        self.index
            .raycast_within(a, &(d / len), len + self.config.clearance_min)
            .is_none()
    }

    pub fn camera(&self, center: Vec3, lookat: Vec3) -> Camera {
        let rot = look_at_rotation(&center, &lookat).unwrap_or_else(Mat3::identity);
        Camera::with_fov(
            self.config.frame_fov_deg.to_radians(),
            self.config.frame_width,
            self.config.frame_height,
            rot,
            center,
        )
        .expect("planner camera parameters are validated by the config")
    }

    pub fn frames(&self, centers: &[Vec3], lookats: &[Vec3]) -> Vec<Frame> {
        centers
            .iter()
            .zip(lookats)
            .map(|(c, l)| Frame {
                camera: self.camera(*c, *l),
                lookat: *l,
            })
            .collect()
    }

    /// Number of leading frames that pass the collision checks.
    pub fn valid_prefix(&self, centers: &[Vec3], navigable: bool) -> usize {
        for (k, p) in centers.iter().enumerate() {
            if !self.center_ok(p) {
                return k;
            }
            if k > 0 {
                if !self.segment_ok(&centers[k - 1], p) {
                    return k;
                }
                if navigable && self.support_cell(p).is_none() {
                    return k;
                }
            }
        }
        centers.len()
    }

    /// Truncates at the first failing frame, then applies the length and movement filters.
    pub fn finish(&self, mut t: Trajectory) -> Option<Trajectory> {
        let n = self.valid_prefix(&t.centers(), t.mode.navigable());
        t.frames.truncate(n);
        if t.frames.len() < 2 || t.max_displacement() < self.config.min_move {
            return None;
        }
        Some(t)
    }
}

/// Inserts evenly spaced points so no step exceeds `max_step`; repeated points are dropped.
pub fn densify(points: &[Vec3], max_step: f64) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        match out.last().copied() {
            None => out.push(*p),
            Some(q) => {
                let d = (p - q).norm();
                if d <= 1e-9 {
                    continue;
                }
                let n = (d / max_step).ceil().max(1.0) as usize;
                for k in 1..=n {
                    out.push(q + (p - q) * (k as f64 / n as f64));
                }
            }
        }
    }
    out
}

/// Angle of a direction above the horizon, radians.
pub fn pitch_of(v: &Vec3) -> f64 {
    v.dot(&UP).atan2((v.x * v.x + v.z * v.z).sqrt())
}

/// Point on a sphere of radius `r` around `c` at azimuth `az` (from `+z` toward `+x`) and
/// elevation angle `el`.
pub(crate) fn orbit_point(c: &Vec3, r: f64, az: f64, el: f64) -> Vec3 {
    c + Vec3::new(el.cos() * az.sin(), -el.sin(), el.cos() * az.cos()) * r
}

/// Number of arc samples so that both the angle and chord limits hold.
pub(crate) fn arc_steps(span: f64, radius: f64, step: f64, max_step: f64) -> usize {
    let by_angle = (span.abs() / step).ceil();
    let by_chord = (span.abs() * radius / max_step).ceil();
    by_angle.max(by_chord).max(1.0) as usize
}

/// Runs all planners in order and enforces per-mode and total caps.
pub fn plan_all(scene: &PlanScene, config: &PlannerConfig, seed: u64) -> Result<TrajectorySet> {
    let ctx = PlanContext::new(scene, config, seed)?;
    let caps = &config.caps;
    let mut out: Vec<Trajectory> = Vec::new();
    let push = |list: Vec<Trajectory>, mode: Mode, out: &mut Vec<Trajectory>| {
        let room = caps.total.saturating_sub(out.len());
        out.extend(list.into_iter().take(caps.get(mode).min(room)));
    };
    push(plan_regular(&ctx), Mode::Regular, &mut out);
    push(plan_surrounding(&ctx), Mode::Surrounding, &mut out);
    let nodes = detect_recon_targets(&scene.mesh, &scene.landmarks, config);
    push(plan_recon_aware(&ctx, &nodes), Mode::ReconAware, &mut out);
    push(plan_wandering(&ctx), Mode::Wandering, &mut out);
    // aerial copies only the surrounding and wandering paths that survived the caps
    let base: Vec<Trajectory> = out
        .iter()
        .filter(|t| t.mode == Mode::Surrounding)
        .chain(out.iter().filter(|t| t.mode == Mode::Wandering))
        .cloned()
        .collect();
    push(plan_aerial(&ctx, &base), Mode::Aerial, &mut out);
    Ok(TrajectorySet { trajectories: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densify_bounds_steps() {
        let pts = [
            Vec3::zeros(),
            Vec3::new(2.5, 0.0, 0.0),
            Vec3::new(2.5, 0.0, 0.0),
            Vec3::new(2.5, 0.0, 0.4),
        ];
        let d = densify(&pts, 1.0);
        assert_eq!(d.len(), 5);
        assert!(d.windows(2).all(|w| (w[1] - w[0]).norm() <= 1.0 + 1e-12));
        assert_eq!(*d.last().unwrap(), pts[3]);
    }

    #[test]
    fn pitch_and_orbit_conventions() {
        assert!((pitch_of(&(UP + Vec3::z())) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let p = orbit_point(&Vec3::zeros(), 2.0, std::f64::consts::FRAC_PI_2, 0.0);
        assert!((p - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(arc_steps(std::f64::consts::PI, 20.0, 5f64.to_radians(), 1.0), 63);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            let s = serde_json::to_string(&m).unwrap();
            assert_eq!(s, format!("\"{}\"", m.name()));
        }
    }
}
