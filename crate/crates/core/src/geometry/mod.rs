//! Cameras, rasters, point clouds, meshes and the queries shared by every other module.

mod camera;
pub mod erp;
mod maps;
mod mesh;
mod normals;
mod pointcloud;
mod raycast;

pub use camera::{elevation, look_at_rotation, yaw_pitch_rotation, Camera, CameraJson, Mat3, Vec3, UP};
pub use erp::{erp_seam_blend, erp_to_perspective};
pub use maps::{remove_edge_floaters, DepthMap, NormalMap, PanoramaImage, RgbImage};
pub use mesh::{box_mesh, build_panoramic_mesh, quad_mesh, Aabb, TriangleMesh, DEFAULT_ASPECT_THRESHOLD};
pub use normals::depth_to_normal;
pub(crate) use pointcloud::voxel_key;
pub use pointcloud::{
    backproject_depth, backproject_depth_colored, backproject_erp, merge_pointclouds, render_depth, voxel_downsample,
    PointCloud,
};
pub use raycast::{closest_point_triangle, intersect_triangle, raycast, Hit, MeshIndex, RAY_EPS};
