//! Pipeline configuration: one TOML file, defaults embedded, `HYG_SECTION__KEY` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::{MaskConfig, RansacConfig, RevisionConfig};
use crate::compose::{LossWeights, MeshExtraction};
use crate::error::{Error, Result};
use crate::pipeline::scene::SceneConfig;
use crate::planner::PlannerConfig;
use crate::resolution::TokenBudget;

/// The documented default configuration file.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("default_config.toml");

/// Prefix of environment overrides; `HYG_PLANNER__MAX_STEP=0.5` sets `planner.max_step`.
pub const ENV_PREFIX: &str = "HYG_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignStageConfig {
    /// Pixel radius used when splatting the panoramic cloud into frames as guidance.
    pub guidance_splat: u32,
    /// Voxel size of the expanded point cloud, meters.
    pub expand_voxel: f64,
    /// Anchor depth range; derived from the guidance depths when absent.
    pub anchor_depth_range: Option<[f64; 2]>,
}

impl Default for AlignStageConfig {
    fn default() -> Self {
        AlignStageConfig {
            guidance_splat: 2,
            expand_voxel: 0.05,
            anchor_depth_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComposeConfig {
    pub voxel: f64,
    /// Truncation distance in voxels.
    pub truncation_voxels: f64,
    pub mesh: MeshExtraction,
    pub weights: LossWeights,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            voxel: 0.05,
            truncation_voxels: 4.0,
            mesh: MeshExtraction {
                min_component_faces: 50,
                target_faces: None,
            },
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub pano_width: u32,
    pub frame_width: u32,
    pub frame_height: u32,
    pub frame_fov_deg: f64,
    /// Frames sampled evenly from each trajectory.
    pub frames_per_sequence: usize,
    /// Scene-wide disparity scale applied to synthetic frame depths.
    pub distortion_gamma: f64,
    /// Scene-wide disparity shift, 1/m.
    pub distortion_beta: f64,
    /// Relative per-frame perturbation of the scale.
    pub distortion_jitter: f64,
    /// Factor applied to the disparity scale of a corrupted sequence.
    pub corruption_gamma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            pano_width: 512,
            frame_width: 160,
            frame_height: 120,
            frame_fov_deg: 90.0,
            frames_per_sequence: 4,
            distortion_gamma: 1.2,
            distortion_beta: 0.02,
            distortion_jitter: 0.005,
            corruption_gamma: 2.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub planner: PlannerConfig,
    pub mask: MaskConfig,
    pub ransac: RansacConfig,
    pub revision: RevisionConfig,
    pub align: AlignStageConfig,
    pub compose: ComposeConfig,
    pub synth: SynthConfig,
    pub budget: TokenBudget,
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("configuration value out of range: {what}")))
    }
}

impl PipelineConfig {
    pub fn from_toml(s: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| {
            let offset = e.span().map(|r| r.start as u64).unwrap_or(0);
            Error::parse("<config>", offset, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Invariant(format!("config serialization failed: {e}")))
    }

    /// Loads a file (or the defaults), then applies `HYG_*` overrides from `vars`.
    pub fn load(path: Option<&Path>, vars: impl IntoIterator<Item = (String, String)>) -> Result<PipelineConfig> {
        let text = match path {
            Some(p) => String::from_utf8(crate::io::read_bytes(p)?)
                .map_err(|e| Error::parse(p, e.utf8_error().valid_up_to() as u64, "config is not UTF-8"))?,
            None => DEFAULT_CONFIG_TOML.to_string(),
        };
        let mut value: toml::Table = toml::from_str(&text).map_err(|e| {
            let offset = e.span().map(|r| r.start as u64).unwrap_or(0);
            Error::parse(path.unwrap_or(Path::new("<config>")), offset, e.message().to_string())
        })?;
        let mut overrides: Vec<(String, String)> =
            vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        overrides.sort();
        for (key, raw) in overrides {
            let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
            set_path(&mut value, &path, parse_literal(&raw)).map_err(|m| Error::invalid(format!("{key}: {m}")))?;
        }
        let cfg: PipelineConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid(format!("configuration: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scene;
        check(s.mesh_stride >= 1, "scene.mesh_stride >= 1")?;
        check(s.cell_size > 0.0, "scene.cell_size > 0")?;
        check(s.agent_height > 0.0, "scene.agent_height > 0")?;
        check((0.0..90.0).contains(&s.max_slope_deg), "scene.max_slope_deg in [0, 90)")?;
        check(s.erosion_radius >= 0.0 && s.bridge_gap >= 0.0, "scene radii >= 0")?;
        let p = &self.planner;
        check(p.frame_width >= 1 && p.frame_height >= 1, "planner frame size >= 1")?;
        check(
            p.frame_fov_deg > 0.0 && p.frame_fov_deg < 180.0,
            "planner.frame_fov_deg in (0, 180)",
        )?;
        check(p.max_step > 0.0 && p.clearance_min >= 0.0, "planner step and clearance")?;
        check(
            p.orbit_step_deg > 0.0 && p.aerial_step_deg > 0.0,
            "planner angular steps > 0",
        )?;
        check(p.caps.total >= 1, "planner.caps.total >= 1")?;
        let m = &self.mask;
        check(
            m.percentile_band[0] >= 0.0
                && m.percentile_band[0] <= m.percentile_band[1]
                && m.percentile_band[1] <= 100.0,
            "mask.percentile_band",
        )?;
        check(
            self.ransac.iterations >= 1 && self.ransac.threshold_rel > 0.0,
            "ransac iterations and threshold",
        )?;
        check(self.revision.anchors >= 2, "revision.anchors >= 2")?;
        check(
            (0.0..=100.0).contains(&self.revision.percentile),
            "revision.percentile in [0, 100]",
        )?;
        check(
            self.align.expand_voxel > 0.0 && self.align.guidance_splat >= 1,
            "align voxel and splat",
        )?;
        if let Some([lo, hi]) = self.align.anchor_depth_range {
            check(lo > 0.0 && hi > lo, "align.anchor_depth_range")?;
        }
        check(
            self.compose.voxel > 0.0 && self.compose.truncation_voxels > 0.0,
            "compose voxel and truncation",
        )?;
        self.compose.weights.validate()?;
        let y = &self.synth;
        check(
            y.pano_width >= 8 && y.pano_width.is_multiple_of(2),
            "synth.pano_width even and >= 8",
        )?;
        check(
            y.frame_width >= 8 && y.frame_height >= 8 && y.frames_per_sequence >= 1,
            "synth frame settings",
        )?;
        check(
            y.distortion_gamma > 0.0 && y.corruption_gamma > 0.0 && y.distortion_jitter >= 0.0,
            "synth distortion",
        )?;
        let b = &self.budget;
        check(
            b.max_tokens >= 1 && b.min_views >= 1 && b.min_views <= b.max_views,
            "budget bounds",
        )?;
        Ok(())
    }
}

/// Reads a value as a TOML literal, falling back to a plain string.
fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> std::result::Result<(), String> {
    match path {
        [] => Err("empty key".into()),
        [last] => {
            table.insert(last.clone(), value);
            Ok(())
        }
        [head, rest @ ..] => {
            let child = table
                .entry(head.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match child {
                toml::Value::Table(t) => set_path(t, rest, value),
                _ => Err(format!("`{head}` is not a section")),
            }
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-module random streams derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Planner = 1,
    Align = 2,
    Compose = 3,
    Synth = 4,
}

/// Seed of stream `s`: `splitmix64(seed ^ splitmix64(s))`. Items inside a stream use
/// [`sub_seed`] with their index.
pub fn stream_seed(seed: u64, s: Stream) -> u64 {
    splitmix64(seed ^ splitmix64(s as u64))
}

pub fn sub_seed(stream: u64, index: u64) -> u64 {
    splitmix64(stream.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}
