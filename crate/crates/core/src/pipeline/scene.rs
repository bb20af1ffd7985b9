//! Scene parsing: panoramic point cloud, panoramic mesh and navigation mesh from ERP depth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    backproject_erp, build_panoramic_mesh, remove_edge_floaters, DepthMap, MeshIndex, PanoramaImage, PointCloud,
    TriangleMesh, Vec3,
};
use crate::navmesh::{NavMesh, NavMeshParams, RefineParams};
use crate::planner::{Landmark, PlanScene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// ERP pixels per panoramic-mesh grid step.
    pub mesh_stride: u32,
    /// Relative depth jump above which point-cloud pixels count as edge floaters.
    pub floater_jump: f64,
    pub cell_size: f64,
    pub agent_height: f64,
    pub max_slope_deg: f64,
    pub step_ratio: f64,
    pub erosion_radius: f64,
    pub bridge_gap: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            mesh_stride: 4,
            floater_jump: 0.1,
            cell_size: 0.25,
            agent_height: 1.6,
            max_slope_deg: 45.0,
            step_ratio: 0.3,
            erosion_radius: 0.25,
            bridge_gap: 0.5,
        }
    }
}

impl SceneConfig {
    pub fn navmesh_params(&self) -> NavMeshParams {
        NavMeshParams {
            cell_size: self.cell_size,
            agent_height: self.agent_height,
            max_slope: self.max_slope_deg.to_radians(),
            step_ratio: self.step_ratio,
        }
    }

    pub fn refine_params(&self) -> RefineParams {
        RefineParams {
            erosion_radius: self.erosion_radius,
            bridge_gap: self.bridge_gap,
            probe_height: 0.5 * self.agent_height,
            max_step: self.step_ratio * self.agent_height,
            max_slope: self.max_slope_deg.to_radians(),
            ..RefineParams::default()
        }
    }
}

/// Geometry recovered from one panorama.
#[derive(Debug, Clone)]
pub struct ParsedScene {
    pub points: PointCloud,
    pub mesh: TriangleMesh,
    pub navmesh: NavMesh,
}

/// Sky pixels become invalid depth.
pub fn mask_sky(depth: &DepthMap, sky: Option<&[bool]>) -> Result<DepthMap> {
    let mut d = depth.clone();
    if let Some(sky) = sky {
        if sky.len() != d.len() {
            return Err(Error::dims(format!("{} sky pixels", d.len()), format!("{}", sky.len())));
        }
        for (i, s) in sky.iter().enumerate() {
            if *s {
                d.invalidate(i);
            }
        }
    }
    Ok(d)
}

pub fn parse_scene(
    pano: &PanoramaImage,
    depth: &DepthMap,
    sky: Option<&[bool]>,
    cfg: &SceneConfig,
) -> Result<ParsedScene> {
    if depth.width != 2 * depth.height {
        return Err(Error::invalid(format!(
            "ERP depth must be 2:1, got {}x{}",
            depth.width, depth.height
        )));
    }
    if pano.width() != depth.width || pano.height() != depth.height {
        return Err(Error::dims(
            format!("{}x{}", depth.width, depth.height),
            format!("{}x{}", pano.width(), pano.height()),
        ));
    }
    let stride = cfg.mesh_stride.max(1);
    let depth = mask_sky(depth, sky)?;
    let center = Vec3::zeros();
    let clean = remove_edge_floaters(&depth, cfg.floater_jump, true);
    let points = backproject_erp(&clean, &center, Some(pano.image()))?;
    let mesh = build_panoramic_mesh(
        &depth,
        (depth.height / stride).max(2),
        (depth.width / stride).max(3),
        &center,
    )?;
    let index = MeshIndex::new(&mesh);
    let raw = crate::navmesh::build::build_navmesh_indexed(&mesh, &index, &cfg.navmesh_params())?;
    let navmesh = crate::navmesh::refine::refine_navmesh_indexed(&raw, &index, &cfg.refine_params());
    navmesh.check_invariants()?;
    Ok(ParsedScene { points, mesh, navmesh })
}

impl ParsedScene {
    pub fn plan_scene(&self, landmarks: Vec<Landmark>, pano_depth: DepthMap) -> PlanScene {
        PlanScene {
            mesh: self.mesh.clone(),
            navmesh: self.navmesh.clone(),
            landmarks,
            pano_depth,
            origin: Vec3::zeros(),
        }
    }
}
