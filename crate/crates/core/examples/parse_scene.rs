//! Renders a synthetic panorama, parses it into a point cloud, mesh and navigation mesh,
//! and writes the results as PLY and JSON.
//!
//! Usage: cargo run --release --example parse_scene -- [box_room|corridor|pillar_floor|step_depth] [out_dir]

use std::path::PathBuf;

use worldkit::io::{write_mesh, write_point_cloud, PlyFormat};
use worldkit::pipeline::scene::{parse_scene, SceneConfig};
use worldkit::pipeline::synth::{SceneKind, SynthScene};

fn main() -> worldkit::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: SceneKind = args.next().as_deref().unwrap_or("box_room").parse()?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "parsed".into()));

    let synth = SynthScene::render(kind, 512, 0)?;
    let parsed = parse_scene(&synth.panorama, &synth.depth, Some(&synth.sky), &SceneConfig::default())?;
    write_point_cloud(&out.join("points.ply"), &parsed.points, PlyFormat::BinaryLittleEndian)?;
    write_mesh(&out.join("mesh.ply"), &parsed.mesh, PlyFormat::BinaryLittleEndian)?;
    worldkit::io::write_atomic(&out.join("navmesh.json"), parsed.navmesh.to_json()?.as_bytes())?;

    let stretched = parsed
        .mesh
        .stretched_faces(worldkit::geometry::DEFAULT_ASPECT_THRESHOLD)
        .len();
    println!(
        "{kind}: {} points, {} faces ({stretched} stretched)",
        parsed.points.len(),
        parsed.mesh.face_count()
    );
    println!(
        "navmesh: {} cells in {} components, {} bridges",
        parsed.navmesh.len(),
        parsed.navmesh.component_count(),
        parsed.navmesh.bridges().len()
    );
    println!("wrote {}", out.display());
    Ok(())
}
