//! File-based pipeline stages. Every stage reads the previous stage's directory and writes its
//! own directory with a `manifest.json` of content hashes.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::{
    apply_alignment, build_reliability_mask, detect_and_revise_outliers, expand_pointcloud, fit_scale_shift,
    AlignCoeff, AlignedFrame,
};
use crate::compose::{extract_mesh, geometric_loss, photometric_loss, TsdfVolume};
use crate::error::{Error, Result};
use crate::geometry::{
    depth_to_normal, render_depth, Camera, CameraJson, DepthMap, MeshIndex, NormalMap, PanoramaImage, RgbImage,
    TriangleMesh, Vec3,
};
use crate::io::{self, PlyFormat};
use crate::navmesh::NavMesh;
use crate::pipeline::config::{stream_seed, sub_seed, PipelineConfig, Stream};
use crate::pipeline::scene::parse_scene;
use crate::pipeline::synth::{render_view, SceneKind, SceneTruth, SynthScene};
use crate::planner::{plan_all, Landmark, PlanScene, TrajectorySet};
use crate::resolution::{pack_samples, rope_analysis_csv};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Outputs of one command with their content hashes, sorted by path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

/// Collects written files for the manifest.
struct OutDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutDir {
    fn new(root: &Path) -> Result<OutDir> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Hashes a file already written under `name`.
    fn record(&mut self, name: &str) -> Result<()> {
        let bytes = io::read_bytes(&self.path(name))?;
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        io::write_atomic(&self.path(name), data)?;
        self.record(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.path(name), value)?;
        self.record(name)
    }

    fn finish(mut self, command: &str, seed: u64) -> Result<Manifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            command: command.to_string(),
            seed,
            files: self.entries,
        };
        io::write_json(&self.root.join(MANIFEST), &m)?;
        Ok(m)
    }
}

fn require(dir: &Path, name: &str, producer: &str) -> Result<PathBuf> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(Error::invalid(format!(
            "{} not found; run `worldkit {producer}` to produce it",
            p.display()
        )));
    }
    Ok(p)
}

fn read_landmarks(path: &Path) -> Result<Vec<Landmark>> {
    let l: Vec<Landmark> = io::read_json(path)?;
    for x in &l {
        x.validate()?;
    }
    Ok(l)
}

// ---------------------------------------------------------------- synth-scene

/// Writes a synthetic scene bundle: panorama, ERP depth, sky mask, landmarks and the
/// analytic ground truth.
pub fn cmd_synth_scene(kind: SceneKind, cfg: &PipelineConfig, out: &Path) -> Result<Manifest> {
    let seed = stream_seed(cfg.seed, Stream::Synth);
    let s = SynthScene::render(kind, cfg.synth.pano_width, seed)?;
    let mut o = OutDir::new(out)?;
    io::write_png(&o.path("panorama.png"), s.panorama.image())?;
    o.record("panorama.png")?;
    o.bytes("depth.hwdm", &io::encode_hwdm(&io::depth_to_raster(&s.depth)))?;
    io::write_mask(&o.path("sky.png"), s.depth.width, s.depth.height, &s.sky)?;
    o.record("sky.png")?;
    o.json("landmarks.json", &s.truth.landmarks)?;
    o.json("truth.json", &s.truth)?;
    o.finish("synth-scene", cfg.seed)
}

/// One synthetic or aligned frame on disk, paths relative to the frames file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub sequence: usize,
    pub camera: CameraJson,
    pub depth: String,
    pub confidence: Option<String>,
    pub normals: Option<String>,
    pub color: Option<String>,
    pub sky: Option<String>,
}

/// Evenly spaced indices `round(k (n - 1) / (m - 1))` for `k < m`, deduplicated.
fn sample_indices(n: usize, m: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    if m <= 1 || n == 1 {
        return vec![0];
    }
    let mut v: Vec<usize> = (0..m.min(n))
        .map(|k| ((k * (n - 1)) as f64 / (m.min(n) - 1) as f64).round() as usize)
        .collect();
    v.dedup();
    v
}

/// Renders analytic frames along planned trajectories, one sequence per trajectory, with
/// a scene-wide disparity distortion and optionally one grossly corrupted sequence.
pub fn cmd_synth_frames(
    kind: SceneKind,
    trajectories: &Path,
    corrupt_sequence: Option<usize>,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<Manifest> {
    let set = TrajectorySet::from_json(&String::from_utf8_lossy(&io::read_bytes(trajectories)?))
        .map_err(|e| Error::parse(trajectories, 0, e.to_string()))?;
    let truth = SceneTruth::new(kind);
    let y = &cfg.synth;
    let seed = stream_seed(cfg.seed, Stream::Synth);
    let mut jobs: Vec<(usize, usize, Camera)> = Vec::new();
    for (s, t) in set.trajectories.iter().enumerate() {
        for i in sample_indices(t.frames.len(), y.frames_per_sequence) {
            let c = &t.frames[i].camera;
            let fx = (y.frame_width as f64 / 2.0) / (y.frame_fov_deg.to_radians() / 2.0).tan();
            let cam = Camera::new(
                fx,
                fx,
                y.frame_width as f64 / 2.0,
                y.frame_height as f64 / 2.0,
                y.frame_width,
                y.frame_height,
                c.rotation,
                c.translation,
            )?;
            jobs.push((jobs.len(), s, cam));
        }
    }
    if let Some(c) = corrupt_sequence {
        if c >= set.len() {
            return Err(Error::invalid(format!(
                "sequence {c} does not exist; {} trajectories",
                set.len()
            )));
        }
    }
    let mut o = OutDir::new(out)?;
    let mut records = Vec::new();
    for (f, s, cam) in jobs {
        let view = render_view(&truth, &cam, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, f as u64));
        let mut gamma = y.distortion_gamma * (1.0 + y.distortion_jitter * rng.random_range(-1.0..=1.0));
        if corrupt_sequence == Some(s) {
            gamma *= y.corruption_gamma;
        }
        let beta = y.distortion_beta;
        let mut d_m = view.depth.clone();
        for i in 0..d_m.len() {
            if !d_m.valid[i] {
                continue;
            }
            // inverse of the alignment model: 1/d_true = gamma / d_m + beta
            let x = (1.0 / d_m.values[i] - beta) / gamma;
            if x > 0.0 {
                d_m.values[i] = 1.0 / x;
            } else {
                d_m.invalidate(i);
            }
        }
        let conf: Vec<f64> = d_m.valid.iter().map(|v| if *v { 1.0 } else { 0.0 }).collect();
        let stem = format!("frames/{f:04}");
        o.bytes(
            &format!("{stem}_depth.hwdm"),
            &io::encode_hwdm(&io::depth_to_raster(&d_m)),
        )?;
        io::write_scalar(&o.path(&format!("{stem}_conf.hwdm")), d_m.width, d_m.height, &conf)?;
        o.record(&format!("{stem}_conf.hwdm"))?;
        io::write_normals(&o.path(&format!("{stem}_normals.hwdm")), &view.normals)?;
        o.record(&format!("{stem}_normals.hwdm"))?;
        io::write_png(&o.path(&format!("{stem}_color.png")), &view.color)?;
        o.record(&format!("{stem}_color.png"))?;
        io::write_mask(&o.path(&format!("{stem}_sky.png")), cam.width, cam.height, &view.sky)?;
        o.record(&format!("{stem}_sky.png"))?;
        records.push(FrameRecord {
            frame: f,
            sequence: s,
            camera: CameraJson::from(&cam),
            depth: format!("{stem}_depth.hwdm"),
            confidence: Some(format!("{stem}_conf.hwdm")),
            normals: Some(format!("{stem}_normals.hwdm")),
            color: Some(format!("{stem}_color.png")),
            sky: Some(format!("{stem}_sky.png")),
        });
    }
    o.json("frames.json", &records)?;
    o.finish("synth-scene --frames-from", cfg.seed)
}

// ---------------------------------------------------------------- parse-scene

/// Summary printed by `parse-scene`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseSummary {
    pub points: usize,
    pub faces: usize,
    pub cells: usize,
    pub components: usize,
}

pub fn cmd_parse_scene(scene: &Path, cfg: &PipelineConfig, out: &Path) -> Result<(Manifest, ParseSummary)> {
    let pano = PanoramaImage::new(io::read_png(&require(scene, "panorama.png", "synth-scene")?)?)?;
    let depth_path = require(scene, "depth.hwdm", "synth-scene")?;
    let depth = io::read_depth(&depth_path)?;
    if depth.width != 2 * depth.height {
        return Err(Error::parse(
            &depth_path,
            0,
            format!(
                "ERP depth must be twice as wide as tall, got {}x{}",
                depth.width, depth.height
            ),
        ));
    }
    let sky_path = scene.join("sky.png");
    let sky = if sky_path.is_file() {
        let (w, h, m) = io::read_mask(&sky_path)?;
        if (w, h) != (depth.width, depth.height) {
            return Err(Error::dims(
                format!("{}x{}", depth.width, depth.height),
                format!("{w}x{h} sky mask"),
            ));
        }
        Some(m)
    } else {
        None
    };
    let lm_path = scene.join("landmarks.json");
    let landmarks = if lm_path.is_file() {
        read_landmarks(&lm_path)?
    } else {
        Vec::new()
    };
    let parsed = parse_scene(&pano, &depth, sky.as_deref(), &cfg.scene)?;
    let mut o = OutDir::new(out)?;
    o.bytes(
        "points.ply",
        &io::encode_point_cloud(&parsed.points, PlyFormat::BinaryLittleEndian),
    )?;
    o.bytes(
        "mesh.ply",
        &io::encode_mesh(&parsed.mesh, PlyFormat::BinaryLittleEndian),
    )?;
    o.bytes("navmesh.json", parsed.navmesh.to_json()?.as_bytes())?;
    o.json("landmarks.json", &landmarks)?;
    o.bytes(
        "pano_depth.hwdm",
        &io::encode_hwdm(&io::depth_to_raster(&crate::pipeline::scene::mask_sky(
            &depth,
            sky.as_deref(),
        )?)),
    )?;
    let summary = ParseSummary {
        points: parsed.points.len(),
        faces: parsed.mesh.face_count(),
        cells: parsed.navmesh.len(),
        components: parsed.navmesh.component_count(),
    };
    Ok((o.finish("parse-scene", cfg.seed)?, summary))
}

// ---------------------------------------------------------------- plan

pub fn cmd_plan(parsed: &Path, cfg: &PipelineConfig, out: &Path) -> Result<(Manifest, TrajectorySet)> {
    let mesh = io::read_mesh(&require(parsed, "mesh.ply", "parse-scene")?)?;
    let nav_path = require(parsed, "navmesh.json", "parse-scene")?;
    let navmesh = NavMesh::from_json(&String::from_utf8_lossy(&io::read_bytes(&nav_path)?))
        .map_err(|e| Error::parse(&nav_path, 0, e.to_string()))?;
    let landmarks = read_landmarks(&require(parsed, "landmarks.json", "parse-scene")?)?;
    let pano_depth = io::read_depth(&require(parsed, "pano_depth.hwdm", "parse-scene")?)?;
    let scene = PlanScene {
        mesh,
        navmesh,
        landmarks,
        pano_depth,
        origin: Vec3::zeros(),
    };
    let set = plan_all(&scene, &cfg.planner, stream_seed(cfg.seed, Stream::Planner))?;
    let mut o = OutDir::new(out)?;
    let mut json = set.to_json()?;
    json.push('\n');
    o.bytes("trajectories.json", json.as_bytes())?;
    o.bytes("cameras.txt", set.to_camera_list().as_bytes())?;
    Ok((o.finish("plan", cfg.seed)?, set))
}

// ---------------------------------------------------------------- align

fn read_frames(dir: &Path, producer: &str) -> Result<Vec<FrameRecord>> {
    io::read_json(&require(dir, "frames.json", producer)?)
}

/// Summary of an alignment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignSummary {
    pub frames: usize,
    pub flagged: usize,
    pub discarded_sequences: Vec<usize>,
    pub expanded_points: usize,
}

struct FrameInputs {
    rec: FrameRecord,
    cam: Camera,
    d_m: DepthMap,
    conf: Vec<f64>,
    normals: NormalMap,
    color: Option<RgbImage>,
    sky: Vec<bool>,
}

fn load_frame(dir: &Path, rec: &FrameRecord) -> Result<FrameInputs> {
    let cam = Camera::try_from(rec.camera.clone())?;
    let d_m = io::read_depth(&dir.join(&rec.depth))?;
    d_m.same_size(cam.width, cam.height)?;
    let n = d_m.len();
    let conf = match &rec.confidence {
        Some(p) => {
            let (w, h, v) = io::read_scalar(&dir.join(p))?;
            d_m.same_size(w, h)?;
            v
        }
        None => vec![1.0; n],
    };
    let normals = match &rec.normals {
        Some(p) => io::read_normals(&dir.join(p))?,
        None => NormalMap::empty(cam.width, cam.height),
    };
    let color = rec.color.as_ref().map(|p| io::read_png(&dir.join(p))).transpose()?;
    let sky = match &rec.sky {
        Some(p) => io::read_mask(&dir.join(p))?.2,
        None => vec![false; n],
    };
    Ok(FrameInputs {
        rec: rec.clone(),
        cam,
        d_m,
        conf,
        normals,
        color,
        sky,
    })
}

/// Aligns every frame to guidance depth rendered from the panoramic cloud, revises outlier
/// transforms and expands the point cloud. Returns a degenerate-result error after writing
/// the report when every sequence is discarded.
pub fn cmd_align(
    parsed: &Path,
    frames_dir: &Path,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<(Manifest, AlignSummary)> {
    let points = io::read_point_cloud(&require(parsed, "points.ply", "parse-scene")?)?;
    let records = read_frames(frames_dir, "synth-scene --frames-from")?;
    if records.len() < 2 {
        return Err(Error::invalid(format!(
            "alignment needs at least 2 frames, got {}",
            records.len()
        )));
    }
    let inputs = records
        .iter()
        .map(|r| load_frame(frames_dir, r))
        .collect::<Result<Vec<_>>>()?;
    let stream = stream_seed(cfg.seed, Stream::Align);
    let fitted: Vec<(AlignCoeff, DepthMap, Vec<bool>)> = inputs
        .par_iter()
        .map(|f| {
            let d_g = render_depth(&points, &f.cam, cfg.align.guidance_splat);
            let n_g = depth_to_normal(&d_g, &f.cam)?;
            let mask = build_reliability_mask(&f.d_m, &d_g, &f.normals, &n_g, &f.conf, &f.sky, &cfg.mask)?;
            let c = match fit_scale_shift(&f.d_m, &d_g, &mask, &cfg.ransac, sub_seed(stream, f.rec.frame as u64)) {
                Ok(c) => AlignCoeff {
                    frame: f.rec.frame,
                    sequence: f.rec.sequence,
                    ..c
                },
                Err(Error::SparseGuidance { .. } | Error::Degenerate(_)) => {
                    AlignCoeff::failed(f.rec.frame, f.rec.sequence)
                }
                Err(e) => return Err(e),
            };
            let keep: Vec<bool> = (0..f.d_m.len())
                .map(|i| mask.confidence[i] && mask.non_sky[i])
                .collect();
            Ok((c, d_g, keep))
        })
        .collect::<Result<_>>()?;
    let depth_range = match cfg.align.anchor_depth_range {
        Some([lo, hi]) => (lo, hi),
        None => {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for (_, d_g, _) in &fitted {
                for v in d_g.valid_values() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::Degenerate("guidance depth has no usable range".into()));
            }
            (lo, hi)
        }
    };
    let coeffs: Vec<AlignCoeff> = fitted.iter().map(|f| f.0.clone()).collect();
    let sequences: Vec<usize> = records.iter().map(|r| r.sequence).collect();
    let (revised, stats) = detect_and_revise_outliers(&coeffs, depth_range, &sequences, &cfg.revision)?;

    let mut o = OutDir::new(out)?;
    o.json("report.json", &revised)?;
    o.json("anchors.json", &stats)?;
    let mut discarded: Vec<usize> = revised
        .iter()
        .filter(|c| c.discarded_sequence)
        .map(|c| c.sequence)
        .collect();
    discarded.dedup();
    if revised.iter().all(|c| c.discarded_sequence) {
        o.finish("align", cfg.seed)?;
        return Err(Error::Degenerate(
            "every sequence was discarded by outlier revision".into(),
        ));
    }
    let mut aligned = Vec::new();
    let mut out_records = Vec::new();
    for ((f, c), (_, _, keep)) in inputs.iter().zip(&revised).zip(&fitted) {
        if c.discarded_sequence {
            continue;
        }
        let d_a = apply_alignment(&f.d_m, c);
        let stem = format!("aligned/{:04}", f.rec.frame);
        o.bytes(
            &format!("{stem}_depth.hwdm"),
            &io::encode_hwdm(&io::depth_to_raster(&d_a)),
        )?;
        let color = match &f.color {
            Some(img) => {
                io::write_png(&o.path(&format!("{stem}_color.png")), img)?;
                o.record(&format!("{stem}_color.png"))?;
                Some(format!("{stem}_color.png"))
            }
            None => None,
        };
        out_records.push(FrameRecord {
            frame: f.rec.frame,
            sequence: f.rec.sequence,
            camera: f.rec.camera.clone(),
            depth: format!("{stem}_depth.hwdm"),
            confidence: None,
            normals: None,
            color,
            sky: None,
        });
        aligned.push(AlignedFrame {
            depth: d_a,
            camera: f.cam.clone(),
            mask: keep.clone(),
            color: f.color.clone(),
        });
    }
    let expanded = expand_pointcloud(&points, &aligned, cfg.align.expand_voxel)?;
    o.bytes(
        "expanded.ply",
        &io::encode_point_cloud(&expanded, PlyFormat::BinaryLittleEndian),
    )?;
    o.json("frames.json", &out_records)?;
    let summary = AlignSummary {
        frames: revised.len(),
        flagged: revised.iter().filter(|c| c.flagged).count(),
        discarded_sequences: discarded,
        expanded_points: expanded.len(),
    };
    Ok((o.finish("align", cfg.seed)?, summary))
}

// ---------------------------------------------------------------- compose

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    /// Fraction of pixels where the fused mesh is hit.
    pub coverage: f64,
    pub photometric: Option<f64>,
    pub geometric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeMetrics {
    pub vertices: usize,
    pub faces: usize,
    pub observed_voxels: usize,
    pub frames: Vec<FrameMetrics>,
    pub mean_photometric: Option<f64>,
    pub mean_geometric: Option<f64>,
}

/// Re-renders the fused mesh into `cam`: z-depth, camera-frame normals facing the camera and
/// colors averaged over the hit face's vertices.
pub fn render_mesh(mesh: &TriangleMesh, index: &MeshIndex, cam: &Camera) -> (DepthMap, NormalMap, RgbImage) {
    let (w, h) = (cam.width, cam.height);
    let rt = cam.rotation.transpose();
    let hits: Vec<Option<(f64, Vec3, [f64; 3])>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let d = cam.ray_direction((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            let hit = index.raycast(&cam.translation, &d)?;
            let z = (rt * (d * hit.t)).z;
            let mut n = rt * mesh.face_normal(hit.face);
            if n.dot(&(rt * d)) > 0.0 {
                n = -n;
            }
            let color = match &mesh.colors {
                Some(c) => {
                    let f = mesh.faces[hit.face];
                    std::array::from_fn(|ch| f.iter().map(|&v| c[v as usize][ch]).sum::<f64>() / 3.0)
                }
                None => [0.5; 3],
            };
            Some((z, n, color))
        })
        .collect();
    let mut depth = DepthMap::empty(w, h);
    let mut normals = NormalMap::empty(w, h);
    let mut img = RgbImage::new(w, h);
    for (i, hit) in hits.into_iter().enumerate() {
        if let Some((z, n, c)) = hit {
            depth.set(i as u32 % w, i as u32 / w, z);
            normals.set_index(i, n);
            img.pixels[i] = c;
        }
    }
    (depth, normals, img)
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Fuses aligned frames into a TSDF, extracts the mesh and scores mesh re-renderings
/// against the inputs.
pub fn cmd_compose(aligned_dir: &Path, cfg: &PipelineConfig, out: &Path) -> Result<(Manifest, ComposeMetrics)> {
    let records = read_frames(aligned_dir, "align")?;
    let expanded = io::read_point_cloud(&require(aligned_dir, "expanded.ply", "align")?)?;
    let c = &cfg.compose;
    let bounds = expanded
        .bounds()
        .ok_or_else(|| Error::Degenerate("expanded point cloud is empty".into()))?
        .inflated(0.05);
    let mut vol = TsdfVolume::new(bounds, c.voxel, c.truncation_voxels * c.voxel)?;
    let mut frames = Vec::new();
    for r in &records {
        let cam = Camera::try_from(r.camera.clone())?;
        let depth = io::read_depth(&aligned_dir.join(&r.depth))?;
        let color = r
            .color
            .as_ref()
            .map(|p| io::read_png(&aligned_dir.join(p)))
            .transpose()?;
        vol.integrate(&depth, color.as_ref(), &cam)?;
        frames.push((r.frame, cam, depth, color));
    }
    if vol.observed_count() == 0 {
        return Err(Error::Degenerate("no voxel was observed by any frame".into()));
    }
    let mesh = extract_mesh(&vol, &c.mesh)?;
    if mesh.is_empty() {
        return Err(Error::Degenerate("fusion produced an empty mesh".into()));
    }
    let index = MeshIndex::new(&mesh);
    let per_frame: Vec<FrameMetrics> = frames
        .iter()
        .map(|(frame, cam, depth, color)| {
            let (d_hat, n_hat, img) = render_mesh(&mesh, &index, cam);
            let n_a = depth_to_normal(depth, cam)?;
            let geometric = match geometric_loss(&d_hat, depth, &n_hat, &n_a, c.weights.lambda_d, c.weights.lambda_n) {
                Ok(v) => Some(v),
                Err(Error::UndefinedLoss(_)) => None,
                Err(e) => return Err(e),
            };
            let photometric = color
                .as_ref()
                .map(|t| photometric_loss(&img, t, c.weights.lambda_c1))
                .transpose()?;
            Ok(FrameMetrics {
                frame: *frame,
                coverage: d_hat.valid_count() as f64 / d_hat.len() as f64,
                photometric,
                geometric,
            })
        })
        .collect::<Result<_>>()?;
    let metrics = ComposeMetrics {
        vertices: mesh.vertices.len(),
        faces: mesh.face_count(),
        observed_voxels: vol.observed_count(),
        mean_photometric: mean(per_frame.iter().filter_map(|f| f.photometric)),
        mean_geometric: mean(per_frame.iter().filter_map(|f| f.geometric)),
        frames: per_frame,
    };
    let mut o = OutDir::new(out)?;
    o.bytes("mesh.ply", &io::encode_mesh(&mesh, PlyFormat::BinaryLittleEndian))?;
    o.json("metrics.json", &metrics)?;
    Ok((o.finish("compose", cfg.seed)?, metrics))
}

// ---------------------------------------------------------------- utils

/// Pairwise center-patch similarities for square grids `sizes`.
pub fn cmd_rope_analysis(sizes: &[u32], cfg: &PipelineConfig, out: &Path) -> Result<Manifest> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::invalid("grid sizes must be positive"));
    }
    let mut o = OutDir::new(out)?;
    o.bytes("rope_similarity.csv", rope_analysis_csv(sizes).as_bytes())?;
    o.finish("utils rope-analysis", cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackSample {
    pub id: String,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackRequest {
    /// Defaults to the configured token budget.
    #[serde(default)]
    pub max_tokens: Option<u64>,
    pub samples: Vec<PackSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackBin {
    pub tokens: u64,
    pub samples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackResult {
    pub max_tokens: u64,
    pub bins: Vec<PackBin>,
}

pub fn cmd_pack(request: &Path, cfg: &PipelineConfig, out: &Path) -> Result<(Manifest, PackResult)> {
    let req: PackRequest = io::read_json(request)?;
    let max_tokens = req.max_tokens.unwrap_or(cfg.budget.max_tokens);
    let tokens: Vec<u64> = req.samples.iter().map(|s| s.tokens).collect();
    let bins = pack_samples(&tokens, max_tokens)?;
    let result = PackResult {
        max_tokens,
        bins: bins
            .iter()
            .map(|b| PackBin {
                tokens: b.iter().map(|&i| tokens[i]).sum(),
                samples: b.iter().map(|&i| req.samples[i].id.clone()).collect(),
            })
            .collect(),
    };
    let mut o = OutDir::new(out)?;
    o.json("bins.json", &result)?;
    Ok((o.finish("utils pack", cfg.seed)?, result))
}
