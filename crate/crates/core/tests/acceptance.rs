#![allow(clippy::needless_range_loop)]

//! Acceptance criteria, one check per criterion. Each prints a PASS or FAIL line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use worldkit::align::{
    detect_and_revise_outliers, fit_scale_shift, AlignCoeff, RansacConfig, ReliabilityMask, RevisionConfig,
};
use worldkit::compose::{composite_masked, extract_mesh, MeshExtraction, PixelEntry, PixelGaussianList, TsdfVolume};
use worldkit::geometry::{
    backproject_depth, depth_to_normal, erp_seam_blend, raycast, render_depth, Aabb, Camera, DepthMap, Mat3,
    PanoramaImage, RgbImage, Vec3,
};
use worldkit::navmesh::{dijkstra_field, Cell, NavMesh};
use worldkit::pipeline::commands::{
    cmd_align, cmd_compose, cmd_parse_scene, cmd_plan, cmd_synth_frames, cmd_synth_scene, MANIFEST,
};
use worldkit::pipeline::config::PipelineConfig;
use worldkit::pipeline::scene::{parse_scene, SceneConfig};
use worldkit::pipeline::synth::{SceneKind, SynthScene};
use worldkit::planner::{plan_all, Mode, PlannerConfig};
use worldkit::resolution::{
    cross_resolution_similarity, token_budget_views, view_limits, CoordMode, PatchGrid, TokenBudget,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn trajectory_caps() -> Outcome {
    let synth = SynthScene::render(SceneKind::PillarFloor, 512, 0).map_err(|e| e.to_string())?;
    let parsed = parse_scene(&synth.panorama, &synth.depth, Some(&synth.sky), &SceneConfig::default())
        .map_err(|e| e.to_string())?;
    let scene = parsed.plan_scene(synth.truth.landmarks.clone(), synth.depth.clone());
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let set = one
        .install(|| plan_all(&scene, &PlannerConfig::default(), 0))
        .map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let caps = [9, 5, 10, 3, 8];
    let counts = set.counts();
    ensure(
        counts.iter().zip(caps).all(|(c, k)| *c <= k),
        format!("counts {counts:?} exceed {caps:?}"),
    )?;
    ensure(set.len() <= 35, format!("total {} exceeds 35", set.len()))?;
    ensure(secs < 30.0, format!("planning took {secs:.1}s"))?;
    Ok(format!(
        "counts {counts:?}, total {}, {secs:.2}s on one thread",
        set.len()
    ))
}

fn collision_safety() -> Outcome {
    let clearance = PlannerConfig::default().clearance_min;
    let (mut segments, mut centers) = (0usize, 0usize);
    for kind in SceneKind::ALL {
        for seed in 0..10u64 {
            let synth = SynthScene::render(kind, 512, seed).map_err(|e| e.to_string())?;
            let parsed = parse_scene(&synth.panorama, &synth.depth, Some(&synth.sky), &SceneConfig::default())
                .map_err(|e| e.to_string())?;
            let scene = parsed.plan_scene(synth.truth.landmarks.clone(), synth.depth.clone());
            let set = plan_all(&scene, &PlannerConfig::default(), seed).map_err(|e| e.to_string())?;
            for t in &set.trajectories {
                let c = t.centers();
                for p in &c {
                    centers += 1;
                    ensure(
                        !synth.truth.inside_geometry(p),
                        format!("{kind} seed {seed}: center {p:?} inside geometry"),
                    )?;
                }
                for w in c.windows(2) {
                    segments += 1;
                    let d = w[1] - w[0];
                    let len = d.norm();
                    if len == 0.0 {
                        continue;
                    }
                    let dir = d / len;
                    let mesh_hit = raycast(&parsed.mesh, &w[0], &dir).is_some_and(|h| h.t <= len + clearance);
                    let true_hit = synth.truth.ray_distance(&w[0], &dir).is_some_and(|t| t <= len);
                    ensure(
                        !mesh_hit && !true_hit,
                        format!(
                            "{kind} seed {seed}: {:?} mode segment {:?} -> {:?} collides",
                            t.mode, w[0], w[1]
                        ),
                    )?;
                }
            }
        }
    }
    Ok(format!(
        "{segments} segments and {centers} centers over 4 fixtures x 10 seeds"
    ))
}

fn random_navmesh(rng: &mut ChaCha8Rng) -> NavMesh {
    let (nx, nz) = (rng.random_range(2..=25), rng.random_range(2..=20));
    let mut cells = Vec::new();
    let mut id = std::collections::HashMap::new();
    for j in 0..nz {
        for i in 0..nx {
            if rng.random_bool(0.8) {
                id.insert((i, j), cells.len());
                let y: f64 = rng.random_range(-0.1..0.1);
                cells.push(Cell {
                    i,
                    j,
                    center: [i as f64 * 0.25 + 0.125, y, j as f64 * 0.25 + 0.125],
                });
            }
        }
    }
    let mut edges = Vec::new();
    for (&(i, j), &a) in &id {
        for (di, dj) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
            if let Some(&b) = id.get(&(i + di, j + dj)) {
                if rng.random_bool(0.9) {
                    edges.push([a.min(b), a.max(b)]);
                }
            }
        }
    }
    edges.sort();
    NavMesh::new(0.25, [0.0, 0.0], cells, &edges).expect("valid navmesh")
}

fn bellman_ford(nav: &NavMesh, source: usize) -> Vec<f64> {
    let mut d = vec![f64::INFINITY; nav.len()];
    d[source] = 0.0;
    let edges = nav.edges();
    for _ in 0..nav.len() {
        let mut changed = false;
        for &[a, b] in &edges {
            let w = (nav.position(a) - nav.position(b)).norm();
            for (u, v) in [(a, b), (b, a)] {
                if d[u] + w < d[v] {
                    d[v] = d[u] + w;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

fn dijkstra_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut meshes = 0;
    let mut compared = 0;
    while meshes < 50 {
        let nav = random_navmesh(&mut rng);
        if nav.is_empty() || nav.len() > 500 {
            continue;
        }
        meshes += 1;
        let source = rng.random_range(0..nav.len());
        let field = dijkstra_field(&nav, source).map_err(|e| e.to_string())?;
        let oracle = bellman_ford(&nav, source);
        for (c, (a, b)) in field.distance.iter().zip(&oracle).enumerate() {
            compared += 1;
            ensure(
                a.to_bits() == b.to_bits(),
                format!("mesh {meshes} cell {c}: dijkstra {a} vs bellman-ford {b}"),
            )?;
        }
    }
    Ok(format!("50 meshes, {compared} distances equal"))
}

fn disparity_pair(g: f64, b: f64, contamination: f64, seed: u64) -> (DepthMap, DepthMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (48, 36);
    let dm = DepthMap::from_fn(w, h, |u, v| Some(0.8 + 0.12 * u as f64 + 0.07 * v as f64));
    let dg = DepthMap::from_fn(w, h, |u, v| {
        let y = g / dm.get(u, v).unwrap() + b;
        if rng.random_bool(contamination) {
            Some(1.0 / (y * rng.random_range(1.5..4.0)))
        } else {
            Some(1.0 / y)
        }
    });
    (dm, dg)
}

fn ransac_recovery() -> Outcome {
    let cfg = RansacConfig::default();
    let (mut worst_clean, mut worst_dirty) = (0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (g, b) = (rng.random_range(0.5..3.0), rng.random_range(-0.05..0.3));
        for (contamination, tol, worst) in [(0.0, 1e-6, &mut worst_clean), (0.3, 1e-3, &mut worst_dirty)] {
            let (dm, dg) = disparity_pair(g, b, contamination, seed);
            let mask = ReliabilityMask::all_valid(&dm, &dg);
            let c = fit_scale_shift(&dm, &dg, &mask, &cfg, seed).map_err(|e| format!("seed {seed}: {e}"))?;
            let err = (c.gamma - g).abs().max((c.beta - b).abs());
            *worst = worst.max(err);
            ensure(
                err <= tol,
                format!("seed {seed} contamination {contamination}: error {err:e}"),
            )?;
        }
    }
    Ok(format!(
        "100/100 seeds; worst error clean {worst_clean:.1e}, 30% contaminated {worst_dirty:.1e}"
    ))
}

fn coeff(frame: usize, sequence: usize, gamma: f64, beta: f64) -> AlignCoeff {
    AlignCoeff {
        gamma,
        beta,
        ..AlignCoeff::identity(frame, sequence)
    }
}

fn outlier_revision() -> Outcome {
    let cfg = RevisionConfig::default();
    let range = (0.5, 8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut frames: Vec<AlignCoeff> = (0..20)
        .map(|i| {
            coeff(
                i,
                0,
                1.2 * (1.0 + rng.random_range(-0.01..0.01)),
                0.02 + rng.random_range(-0.002..0.002),
            )
        })
        .collect();
    frames[13] = coeff(13, 0, 2.4, 0.02);
    let seqs = vec![0; 20];
    let (a, _) = detect_and_revise_outliers(&frames, range, &seqs, &cfg).map_err(|e| e.to_string())?;
    let flagged: Vec<usize> = a.iter().filter(|c| c.flagged).map(|c| c.frame).collect();
    ensure(flagged == vec![13], format!("19+1 case flagged {flagged:?}"))?;
    ensure(
        a[13].revised_from == Some(12),
        format!("deviant revised from {:?}", a[13].revised_from),
    )?;

    let mut mixed = frames.clone();
    mixed[13] = frames[12].clone();
    mixed[13].frame = 13;
    mixed.push(coeff(20, 1, 2.5, 0.03));
    mixed.push(coeff(21, 1, 2.6, 0.01));
    let seqs: Vec<usize> = mixed.iter().map(|c| c.sequence).collect();
    let run = || detect_and_revise_outliers(&mixed, range, &seqs, &cfg).map_err(|e| e.to_string());
    let (b, _) = run()?;
    ensure(
        b[20].discarded_sequence && b[21].discarded_sequence,
        "all-deviant sequence kept",
    )?;
    ensure(
        b[..20].iter().all(|c| !c.discarded_sequence),
        "a consistent sequence was discarded",
    )?;
    let (c, _) = run()?;
    ensure(b == c, "revision differs across runs")?;
    Ok("19+1 flags only frame 13; all-deviant sequence 1 discarded; repeat runs identical".into())
}

fn classical_composite(entries: &[PixelEntry]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for (k, e) in entries.iter().enumerate() {
        let t: f64 = entries[..k].iter().map(|p| 1.0 - p.opacity).product();
        for ch in 0..3 {
            c[ch] += e.color[ch] * e.opacity * t;
        }
    }
    c
}

fn masked_compositing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for n in 0..10_000 {
        let len = rng.random_range(0..24);
        let entries: Vec<PixelEntry> = (0..len)
            .map(|_| PixelEntry {
                depth: rng.random_range(0.1..10.0),
                opacity: rng.random_range(0.0..=1.0),
                color: [rng.random(), rng.random(), rng.random()],
                mask: if rng.random_bool(0.6) { 1.0 } else { 0.0 },
            })
            .collect();
        let full = PixelGaussianList::new(entries);
        let kept = PixelGaussianList::new(full.entries.iter().filter(|e| e.mask != 0.0).copied().collect());
        let (a, ta) = composite_masked(&full);
        let (b, tb) = composite_masked(&kept);
        let same = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()) && ta.to_bits() == tb.to_bits();
        ensure(same, format!("list {n}: masked {a:?}/{ta} vs deleted {b:?}/{tb}"))?;
        let ones = PixelGaussianList::new(full.entries.iter().map(|e| PixelEntry { mask: 1.0, ..*e }).collect());
        let (c, _) = composite_masked(&ones);
        let o = classical_composite(&ones.entries);
        let err = c.iter().zip(&o).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        ensure(err <= 1e-12, format!("list {n}: all-ones error {err:e}"))?;
    }
    Ok(format!(
        "10^4 lists bit-exact under deletion; all-ones max error {worst:.1e}"
    ))
}

fn normalized_rope() -> Outcome {
    let t0 = Instant::now();
    let (mut norm_min, mut abs_min) = (f64::INFINITY, f64::INFINITY);
    for a in 8..=64u32 {
        for b in 8..=64u32 {
            let (ga, gb) = (PatchGrid::square(a), PatchGrid::square(b));
            norm_min = norm_min.min(cross_resolution_similarity(&ga, &gb, CoordMode::Normalized));
            abs_min = abs_min.min(cross_resolution_similarity(&ga, &gb, CoordMode::Absolute));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(norm_min > 0.95, format!("normalized minimum {norm_min}"))?;
    ensure(
        norm_min > abs_min,
        format!("normalized minimum {norm_min} vs absolute {abs_min}"),
    )?;
    ensure(secs < 1.0, format!("took {secs:.2}s"))?;
    Ok(format!(
        "normalized min {norm_min:.4} > absolute min {abs_min:.4}, {secs:.3}s"
    ))
}

fn token_budget() -> Outcome {
    let b = TokenBudget::default();
    let (t, n_max) = view_limits(&b, 518, 378, 14).map_err(|e| e.to_string())?;
    ensure(
        (t, n_max) == (999, 25),
        format!("worked example gives t {t}, N_max {n_max}"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut feasible, mut infeasible) = (0, 0);
    for i in 0..100_000u64 {
        let budget = TokenBudget {
            max_tokens: rng.random_range(1..200_000),
            min_views: rng.random_range(1..8),
            max_views: rng.random_range(8..64),
        };
        let p = rng.random_range(1..32);
        let (h, w) = (rng.random_range(p..2048), rng.random_range(p..2048));
        match token_budget_views(&budget, h, w, p, i) {
            Ok(n) => {
                feasible += 1;
                let t = (h / p) as u64 * (w / p) as u64;
                ensure(
                    n * t <= budget.max_tokens,
                    format!("config {i}: {n} views x {t} tokens > {}", budget.max_tokens),
                )?;
                ensure(
                    n >= budget.min_views && n <= budget.max_views,
                    format!("config {i}: {n} views out of range"),
                )?;
            }
            Err(_) => infeasible += 1,
        }
    }
    Ok(format!(
        "worked example t 999, N_max 25; fuzz {feasible} feasible, {infeasible} rejected, no violations"
    ))
}

fn tsdf_primitives() -> Outcome {
    let t0 = Instant::now();
    let bounds = Aabb {
        min: Vec3::repeat(-1.2),
        max: Vec3::repeat(1.2),
    };
    let voxel = 0.02;
    let vol = TsdfVolume::from_sdf_fn(bounds, voxel, 4.0 * voxel, |p| p.norm() - 1.0).map_err(|e| e.to_string())?;
    let sphere = extract_mesh(&vol, &MeshExtraction::default()).map_err(|e| e.to_string())?;
    let err = sphere.vertices.iter().map(|v| (v.norm() - 1.0).abs()).sum::<f64>() / sphere.vertices.len() as f64;
    ensure(err < 0.02, format!("sphere mean error {err}"))?;

    let cam =
        Camera::with_fov(70f64.to_radians(), 96, 72, Mat3::identity(), Vec3::zeros()).map_err(|e| e.to_string())?;
    let pv = 0.05;
    let plane_bounds = Aabb {
        min: Vec3::new(-1.0, -0.8, 1.5),
        max: Vec3::new(1.0, 0.8, 2.5),
    };
    let mut plane = TsdfVolume::new(plane_bounds, pv, 4.0 * pv).map_err(|e| e.to_string())?;
    plane
        .integrate(&DepthMap::from_fn(96, 72, |_, _| Some(2.0)), None, &cam)
        .map_err(|e| e.to_string())?;
    let pm = extract_mesh(&plane, &MeshExtraction::default()).map_err(|e| e.to_string())?;
    ensure(!pm.is_empty(), "plane mesh is empty")?;
    let residual = pm.vertices.iter().map(|v| (v.z - 2.0).abs()).fold(0.0, f64::max);
    ensure(residual < pv, format!("plane residual {residual}"))?;
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "sphere mean error {err:.2e} m over {} faces; plane max residual {residual:.2e} m; {secs:.1}s",
        sphere.face_count()
    ))
}

fn geometry_round_trips() -> Outcome {
    let rot = worldkit::geometry::yaw_pitch_rotation(0.3, -0.2);
    let cam = Camera::with_fov(1.2, 80, 60, rot, Vec3::new(0.4, -1.0, 0.7)).map_err(|e| e.to_string())?;
    let depth = DepthMap::from_fn(80, 60, |u, v| {
        Some(2.0 + 0.5 * (u as f64 * 0.1).sin() + 0.01 * v as f64)
    });
    let pc = backproject_depth(&depth, &cam).map_err(|e| e.to_string())?;
    let back = render_depth(&pc, &cam, 1);
    let mut depth_err = 0.0f64;
    for i in 0..depth.len() {
        ensure(back.valid[i], format!("pixel {i} lost in the round trip"))?;
        depth_err = depth_err.max((back.values[i] - depth.values[i]).abs());
    }
    ensure(depth_err <= 1e-4, format!("depth round trip error {depth_err}"))?;

    // plane n . X = 1 in the camera frame, seen by an identity camera
    let flat = Camera::with_fov(1.2, 80, 60, Mat3::identity(), Vec3::zeros()).map_err(|e| e.to_string())?;
    let n = Vec3::new(0.3, -0.2, 1.0).normalize();
    let d = 2.0;
    let plane = DepthMap::from_fn(80, 60, |u, v| {
        let r = flat.unproject_camera(u as f64 + 0.5, v as f64 + 0.5, 1.0);
        Some(d / n.dot(&r))
    });
    let normals = depth_to_normal(&plane, &flat).map_err(|e| e.to_string())?;
    let mut angle_err = 0.0f64;
    for v in 1..59 {
        for u in 1..79 {
            let m = normals.get(u, v).ok_or(format!("no normal at ({u}, {v})"))?;
            angle_err = angle_err.max(m.dot(&-n).clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    ensure(angle_err < 1.0, format!("plane normal error {angle_err} deg"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let img = RgbImage::from_fn(128, 64, |_, _| [rng.random(), rng.random(), rng.random()]);
    let blended = erp_seam_blend(&PanoramaImage::new(img).map_err(|e| e.to_string())?, 8).map_err(|e| e.to_string())?;
    let b = blended.image();
    let mut seam = 0.0f64;
    for v in 0..64 {
        let (l, r) = (b.get(0, v), b.get(127, v));
        seam = seam.max(l.iter().zip(&r).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    ensure(seam <= 1e-6, format!("seam difference {seam}"))?;
    Ok(format!(
        "depth round trip {depth_err:.1e} m; plane normal {angle_err:.3} deg; seam {seam:.1e}"
    ))
}

fn run_pipeline(root: &std::path::Path, cfg: &PipelineConfig) -> worldkit::Result<Vec<Vec<u8>>> {
    let (s, p, t, f, a, c) = (
        root.join("scene"),
        root.join("parsed"),
        root.join("plan"),
        root.join("frames"),
        root.join("aligned"),
        root.join("composed"),
    );
    cmd_synth_scene(SceneKind::BoxRoom, cfg, &s)?;
    cmd_parse_scene(&s, cfg, &p)?;
    cmd_plan(&p, cfg, &t)?;
    cmd_synth_frames(SceneKind::BoxRoom, &t.join("trajectories.json"), None, cfg, &f)?;
    cmd_align(&p, &f, cfg, &a)?;
    cmd_compose(&a, cfg, &c)?;
    [p, t, a, c]
        .iter()
        .map(|d| worldkit::io::read_bytes(&d.join(MANIFEST)))
        .collect()
}

fn end_to_end_determinism() -> Outcome {
    let cfg = PipelineConfig {
        seed: 7,
        ..PipelineConfig::default()
    };
    let t0 = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_pipeline(a.path(), &cfg).map_err(|e| e.to_string())?;
    let second = run_pipeline(b.path(), &cfg).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    ensure(first == second, "manifests differ between runs")?;
    ensure(secs < 300.0, format!("two runs took {secs:.0}s"))?;
    let bytes = worldkit::io::read_bytes(&a.path().join("plan/trajectories.json")).map_err(|e| e.to_string())?;
    let plan =
        worldkit::planner::TrajectorySet::from_json(&String::from_utf8_lossy(&bytes)).map_err(|e| e.to_string())?;
    ensure(plan.count(Mode::Regular) > 0, "no trajectories planned")?;
    Ok(format!("4 stage manifests byte-identical; two full runs in {secs:.1}s"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        ("trajectory caps", trajectory_caps),
        ("collision safety", collision_safety),
        ("dijkstra oracle equivalence", dijkstra_oracle),
        ("ransac alignment recovery", ransac_recovery),
        ("outlier revision", outlier_revision),
        ("masked compositing", masked_compositing),
        ("normalized rope", normalized_rope),
        ("token budget", token_budget),
        ("tsdf primitives", tsdf_primitives),
        ("geometry round trips", geometry_round_trips),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match &outcome {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail} ({secs:.2}s)", i + 1),
            Err(why) => {
                println!("[FAIL] {:>2} {name}: {why} ({secs:.2}s)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
