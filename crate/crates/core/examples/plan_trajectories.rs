//! Plans camera trajectories over a synthetic scene and prints per-mode counts.
//!
//! Usage: cargo run --release --example plan_trajectories -- [box_room|corridor|pillar_floor|step_depth] [seed]

use std::time::Instant;

use worldkit::pipeline::scene::{parse_scene, SceneConfig};
use worldkit::pipeline::synth::{SceneKind, SynthScene};
use worldkit::planner::{plan_all, Mode, PlannerConfig};

fn main() -> worldkit::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: SceneKind = args.next().as_deref().unwrap_or("pillar_floor").parse()?;
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let synth = SynthScene::render(kind, 512, seed)?;
    let t0 = Instant::now();
    let parsed = parse_scene(&synth.panorama, &synth.depth, Some(&synth.sky), &SceneConfig::default())?;
    println!(
        "{kind}: {} points, {} faces, {} navmesh cells in {} components ({:.2}s)",
        parsed.points.len(),
        parsed.mesh.face_count(),
        parsed.navmesh.len(),
        parsed.navmesh.component_count(),
        t0.elapsed().as_secs_f64()
    );
    let scene = parsed.plan_scene(synth.truth.landmarks.clone(), synth.depth.clone());
    let t1 = Instant::now();
    let set = plan_all(&scene, &PlannerConfig::default(), seed)?;
    println!(
        "planned {} trajectories in {:.2}s",
        set.len(),
        t1.elapsed().as_secs_f64()
    );
    for m in Mode::ALL {
        let frames: Vec<usize> = set.of_mode(m).map(|t| t.frames.len()).collect();
        println!("  {:<12} {:>2}  frames {:?}", m.name(), set.count(m), frames);
    }
    Ok(())
}
