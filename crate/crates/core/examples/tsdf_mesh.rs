//! Fuses depth maps of an analytic room into a TSDF volume, extracts a mesh with marching
//! cubes and reports its accuracy against the analytic surfaces.
//!
//! Usage: cargo run --release --example tsdf_mesh -- [voxel] [out.ply]

use worldkit::compose::{extract_mesh, simplify_mesh, MeshExtraction, TsdfVolume};
use worldkit::geometry::{look_at_rotation, Aabb, Camera, Vec3};
use worldkit::io::{write_mesh, PlyFormat};
use worldkit::pipeline::synth::{render_view, SceneKind, SceneTruth};

fn main() -> worldkit::Result<()> {
    let mut args = std::env::args().skip(1);
    let voxel: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let out = args.next().unwrap_or_else(|| "room.ply".into());

    let truth = SceneTruth::new(SceneKind::BoxRoom);
    let bounds = Aabb {
        min: Vec3::from(truth.room.min),
        max: Vec3::from(truth.room.max),
    }
    .inflated(0.05);
    let mut vol = TsdfVolume::new(bounds, voxel, 4.0 * voxel)?;
    for k in 0..16 {
        let angle = k as f64 * std::f64::consts::TAU / 16.0;
        let eye = Vec3::new(0.5 * angle.cos(), -0.2, 0.5 * angle.sin());
        let target = eye + Vec3::new(angle.sin(), 0.3, angle.cos());
        let rot = look_at_rotation(&eye, &target).expect("non-degenerate view");
        let cam = Camera::with_fov(1.5, 192, 144, rot, eye)?;
        let view = render_view(&truth, &cam, 0);
        vol.integrate(&view.depth, Some(&view.color), &cam)?;
    }
    let mesh = extract_mesh(&vol, &MeshExtraction::default())?;
    // distance of each vertex to the nearest room wall
    let wall = |p: &Vec3| {
        (0..3)
            .map(|k| (p[k] - truth.room.min[k]).abs().min((p[k] - truth.room.max[k]).abs()))
            .fold(f64::INFINITY, f64::min)
    };
    let mean = mesh.vertices.iter().map(wall).sum::<f64>() / mesh.vertices.len().max(1) as f64;
    println!(
        "{} observed voxels, {} vertices, {} faces, mean wall distance {mean:.4} m",
        vol.observed_count(),
        mesh.vertices.len(),
        mesh.face_count()
    );
    let small = simplify_mesh(&mesh, mesh.face_count() / 10);
    println!("simplified to {} faces", small.face_count());
    write_mesh(std::path::Path::new(&out), &mesh, PlyFormat::BinaryLittleEndian)?;
    println!("wrote {out}");
    Ok(())
}
