use worldkit::geometry::erp::pixel_direction;
use worldkit::geometry::{box_mesh, DepthMap, MeshIndex, TriangleMesh, Vec3};
use worldkit::navmesh::{build_navmesh, NavMesh, NavMeshParams};
use worldkit::pipeline::scene::{parse_scene, SceneConfig};
use worldkit::pipeline::synth::{SceneKind, SynthScene};
use worldkit::planner::{
    pitch_of, plan_aerial, plan_all, Caps, Frame, Mode, PlanContext, PlanScene, PlannerConfig, Trajectory,
};

/// Radial ERP depth of `mesh` seen from the origin.
fn erp_depth(mesh: &TriangleMesh, width: u32) -> DepthMap {
    let index = MeshIndex::new(mesh);
    let h = width / 2;
    DepthMap::from_fn(width, h, |u, v| {
        let d = pixel_direction(u as f64 + 0.5, v as f64 + 0.5, width, h);
        index.raycast(&Vec3::zeros(), &d).map(|hit| hit.t)
    })
}

/// Closed room around the origin with the floor `below` meters down (y is down).
fn room(half: f64, below: f64, above: f64) -> TriangleMesh {
    box_mesh(Vec3::new(-half, -above, -half), Vec3::new(half, below, half), true)
}

fn scene(mesh: TriangleMesh, navmesh: Option<NavMesh>) -> PlanScene {
    let navmesh = navmesh.unwrap_or_else(|| build_navmesh(&mesh, &NavMeshParams::default()).unwrap());
    PlanScene {
        pano_depth: erp_depth(&mesh, 128),
        mesh,
        navmesh,
        landmarks: Vec::new(),
        origin: Vec3::zeros(),
    }
}

fn all_centers_clear(scene: &PlanScene, cfg: &PlannerConfig, set: &worldkit::planner::TrajectorySet) {
    let index = MeshIndex::new(&scene.mesh);
    for t in &set.trajectories {
        for c in t.centers() {
            assert!(
                index.distance(&c) >= cfg.clearance_min - 1e-9,
                "{:?} center {c:?} too close",
                t.mode
            );
        }
    }
}

#[test]
fn open_room_gets_all_regular_orbits() {
    let s = scene(room(10.0, 1.4, 3.6), None);
    let cfg = PlannerConfig::default();
    let set = plan_all(&s, &cfg, 0).unwrap();
    assert_eq!(set.count(Mode::Regular), 9);
    assert!(set.count(Mode::Wandering) > 0);
    all_centers_clear(&s, &cfg, &set);
    for t in set.of_mode(Mode::Regular) {
        let first = t.frames[0].center();
        assert!(first.norm() < 1e-12, "regular orbits start at the panorama center");
        assert!(t
            .frames
            .windows(2)
            .all(|w| (w[1].center() - w[0].center()).norm() <= cfg.max_step + 1e-9));
    }
}

#[test]
fn tight_shell_admits_no_regular_orbit() {
    let s = scene(room(0.25, 0.25, 0.25), Some(NavMesh::empty(0.25, [0.0, 0.0])));
    let set = plan_all(&s, &PlannerConfig::default(), 0).unwrap();
    assert_eq!(set.count(Mode::Regular), 0);
}

#[test]
fn empty_navmesh_leaves_only_regular_orbits() {
    let s = scene(room(10.0, 1.4, 3.6), Some(NavMesh::empty(0.25, [0.0, 0.0])));
    let set = plan_all(&s, &PlannerConfig::default(), 0).unwrap();
    assert!(set.count(Mode::Regular) > 0);
    assert!(set.trajectories.iter().all(|t| t.mode == Mode::Regular));
}

#[test]
fn caps_bound_every_mode_and_the_total() {
    let synth = SynthScene::render(SceneKind::PillarFloor, 256, 1).unwrap();
    let parsed = parse_scene(&synth.panorama, &synth.depth, Some(&synth.sky), &SceneConfig::default()).unwrap();
    let s = parsed.plan_scene(synth.truth.landmarks.clone(), synth.depth.clone());
    let cfg = PlannerConfig {
        caps: Caps {
            regular: 2,
            surrounding: 1,
            recon_aware: 1,
            wandering: 1,
            aerial: 1,
            total: 4,
        },
        ..PlannerConfig::default()
    };
    let set = plan_all(&s, &cfg, 0).unwrap();
    for m in Mode::ALL {
        assert!(set.count(m) <= cfg.caps.get(m), "{m:?}");
    }
    assert!(set.len() <= 4);
    let free = plan_all(&s, &PlannerConfig::default(), 0).unwrap();
    assert!(free.len() > set.len());
}

#[test]
fn planning_is_deterministic() {
    let s = scene(room(10.0, 1.4, 3.6), None);
    let cfg = PlannerConfig::default();
    let a = plan_all(&s, &cfg, 4).unwrap();
    let b = plan_all(&s, &cfg, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let round = worldkit::planner::TrajectorySet::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(round.counts(), a.counts());
}

fn horizontal_walk(ctx: &PlanContext) -> Trajectory {
    let centers: Vec<Vec3> = (0..6).map(|k| Vec3::new(-1.0 + 0.4 * k as f64, 0.0, 0.0)).collect();
    let lookats: Vec<Vec3> = centers.iter().map(|c| c + Vec3::new(0.0, 0.0, 3.0)).collect();
    let frames: Vec<Frame> = ctx.frames(&centers, &lookats);
    Trajectory {
        mode: Mode::Wandering,
        frames,
        landmark_id: None,
        iterative: false,
    }
}

#[test]
fn aerial_views_pitch_up_under_open_sky() {
    // floor only: the sky is open
    let floor = worldkit::geometry::quad_mesh(
        Vec3::new(-10.0, 1.4, -10.0),
        Vec3::new(20.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, 20.0),
    );
    let s = scene(floor, None);
    let cfg = PlannerConfig::default();
    let ctx = PlanContext::new(&s, &cfg, 0).unwrap();
    let out = plan_aerial(&ctx, &[horizontal_walk(&ctx)]);
    assert_eq!(out.len(), 1);
    for f in &out[0].frames {
        let p = pitch_of(&(f.lookat - f.center()));
        assert!(
            (p - cfg.aerial_pitch_deg.to_radians()).abs() < 1e-9,
            "pitch {}",
            p.to_degrees()
        );
    }
}

#[test]
fn aerial_views_stay_low_under_a_low_ceiling() {
    let s = scene(room(10.0, 1.4, 0.4), None);
    let cfg = PlannerConfig::default();
    let ctx = PlanContext::new(&s, &cfg, 0).unwrap();
    let out = plan_aerial(&ctx, &[horizontal_walk(&ctx)]);
    assert_eq!(out.len(), 1);
    for f in &out[0].frames {
        let p = pitch_of(&(f.lookat - f.center()));
        assert!(p < cfg.aerial_pitch_deg.to_radians() - 1e-6, "pitch {}", p.to_degrees());
        // the pitched ray clears the ceiling beyond the near limit
        let d = (f.lookat - f.center()).normalize();
        assert!(
            ctx.index
                .raycast_within(&f.center(), &d, cfg.aerial_near_limit)
                .is_none()
                || p <= 1e-9
        );
    }
}

#[test]
fn pillar_floor_plans_every_mode_safely() {
    let synth = SynthScene::render(SceneKind::PillarFloor, 512, 0).unwrap();
    let parsed = parse_scene(&synth.panorama, &synth.depth, Some(&synth.sky), &SceneConfig::default()).unwrap();
    let s = parsed.plan_scene(synth.truth.landmarks.clone(), synth.depth.clone());
    let cfg = PlannerConfig::default();
    let set = plan_all(&s, &cfg, 0).unwrap();
    for m in Mode::ALL {
        assert!(set.count(m) > 0, "{m:?} produced nothing");
    }
    all_centers_clear(&s, &cfg, &set);
    for t in &set.trajectories {
        for c in t.centers() {
            assert!(!synth.truth.inside_geometry(&c));
        }
    }
    // a surrounding orbit keeps the landmark in view from every frame
    let l = synth.truth.landmarks[0].position();
    for t in set.of_mode(Mode::Surrounding) {
        for f in &t.frames {
            assert!(f.camera.project(&l).is_some());
        }
    }
}
